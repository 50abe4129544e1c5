use proptest::prelude::*;
use scsim_core::{integrate, normalize, FiniteMeasure, KillingRate, Matrix, MotionModel, TestFunction};

fn masses(d: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0..10.0f64, d)
}

fn model() -> impl Strategy<Value = MotionModel> {
    (2usize..=5).prop_flat_map(|d| proptest::collection::vec(0.0..4.0f64, d * d).prop_map(move |raw| {
        let mut q = vec![0.0; d * d];
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                if i != j {
                    q[i * d + j] = raw[i * d + j];
                    row += raw[i * d + j];
                }
            }
            q[i * d + i] = -row;
        }
        MotionModel::from_row_major(d, q).unwrap()
    }))
}

proptest! {
    #[test]
    fn integrate_is_bilinear(a in 0.0..5.0f64, x in masses(3), y in masses(3), f in masses(3)) {
        let (mx, my, tf) = (FiniteMeasure::new(x).unwrap(), FiniteMeasure::new(y).unwrap(), TestFunction::new(f).unwrap());
        let lhs = integrate(&mx.scaled(a).sum(&my).unwrap(), &tf).unwrap();
        let rhs = a * integrate(&mx, &tf).unwrap() + integrate(&my, &tf).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        prop_assert_eq!(integrate(&mx, &TestFunction::zero(3)).unwrap(), 0.0);
        prop_assert_eq!(integrate(&FiniteMeasure::zero(3), &tf).unwrap(), 0.0);
    }

    #[test]
    fn normalization_is_scale_invariant(x in masses(4), c in 0.01..100.0f64) {
        let m = FiniteMeasure::new(x).unwrap();
        let (a, b) = (normalize(&m), normalize(&m.scaled(c)));
        match (a.probabilities, b.probabilities) {
            (Some(p), Some(q)) => {
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                for (u, v) in p.iter().zip(&q) {
                    prop_assert!((u - v).abs() <= 1e-12);
                }
            }
            (None, None) => prop_assert_eq!(a.total, 0.0),
            _ => prop_assert!(false, "absence of probabilities must agree"),
        }
    }

    #[test]
    fn semigroup_laws(m in model(), t in 0.0..2.0f64, s in 0.0..2.0f64, seed in 0u64..1000) {
        let d = m.dim();
        let p = |x: f64| m.transition(x).unwrap();
        prop_assert!(p(t + s).max_abs_diff(&p(t).matmul(&p(s))) <= 1e-9);
        for r in p(2.5 * t).row_sums() {
            prop_assert!((r - 1.0).abs() <= 1e-10);
        }

        let rates: Vec<f64> = (0..d).map(|i| ((seed >> i) & 3) as f64 * 0.5).collect();
        let b = KillingRate::new(rates).unwrap();
        let k = |x: f64| m.killed_transition(&b, x).unwrap();
        prop_assert!(k(t + s).max_abs_diff(&k(t).matmul(&k(s))) <= 1e-9);
        prop_assert!(k(t).as_slice().iter().all(|&v| v >= 0.0));

        let h = TestFunction::new((0..d).map(|i| 0.5 + ((seed >> (2 * i)) & 7) as f64).collect()).unwrap();
        let ht = |x: f64| m.h_transform(&b, &h, x).unwrap();
        let composed: Matrix = ht(t).matmul(&ht(s));
        prop_assert!(ht(t + s).max_abs_diff(&composed) <= 1e-9 * (1.0 + composed.norm_inf()));
    }

    #[test]
    fn constant_killing_factorizes(m in model(), b in 0.0..3.0f64, t in 0.0..2.0f64) {
        let k = m.killed_transition(&KillingRate::constant(m.dim(), b).unwrap(), t).unwrap();
        let p = m.transition(t).unwrap().scaled((-b * t).exp());
        prop_assert!(k.max_abs_diff(&p) <= 1e-10);
    }
}
