use cylspace::operators::{mean_c, mean_s, var_l, var_s};
use cylspace::{AngularWindow, TruncatedKet, C64};
use proptest::prelude::*;

fn ket_strategy() -> impl Strategy<Value = TruncatedKet> {
    (2usize..8, 0.0f64..1.0).prop_flat_map(|(hw, delta)| {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2 * hw + 1).prop_filter_map("zero ket", move |v| {
            let w = AngularWindow::centered(0, hw, delta).ok()?;
            let coeffs = v.into_iter().map(|(a, b)| C64::new(a, b)).collect();
            TruncatedKet::new(w, coeffs).ok()?.normalized().ok()
        })
    })
}

proptest! {
    #[test]
    fn robertson_bound_holds(ket in ket_strategy(), alpha in -3.0f64..3.0) {
        let lhs = var_l(&ket) * var_s(&ket, alpha);
        let rhs = 0.25 * mean_c(&ket, alpha).powi(2);
        prop_assert!(lhs >= rhs - 1e-12, "{lhs} < {rhs}");
    }

    #[test]
    fn sine_moments_are_bounded(ket in ket_strategy(), alpha in -3.0f64..3.0) {
        let s = mean_s(&ket, alpha);
        let c = mean_c(&ket, alpha);
        prop_assert!(s * s + c * c <= 1.0 + 1e-12);
        prop_assert!(var_s(&ket, alpha) >= -1e-15);
    }
}
