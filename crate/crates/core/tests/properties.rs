use catgate::channel::{gate, loss_channel};
use catgate::fock::CMatrix;
use catgate::homodyne::{quad_density, BinProjectors, Binning};
use catgate::{partial_trace, tensor, wigner_at, DensityOperator, GateParams, Mode, C64};
use proptest::prelude::*;

/// Random rank-2 state whose population decays fast enough to stay clear
/// of the truncation edge.
fn state(cutoff: usize) -> impl Strategy<Value = DensityOperator> {
    let d = cutoff + 1;
    prop::collection::vec(-1.0f64..1.0, 4 * d).prop_map(move |v| {
        let g = CMatrix::from_fn(d, 2, |i, j| {
            let k = 2 * (j * d + i);
            C64::new(v[k], v[k + 1]) * 0.45f64.powi(i as i32)
        });
        let m = &g * g.adjoint();
        let tr = m.trace();
        DensityOperator::from_matrix(cutoff, 1, m / tr).expect("valid state")
    })
}

fn max_diff(a: &DensityOperator, b: &DensityOperator) -> f64 {
    (a.matrix() - b.matrix()).camax()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partial_trace_inverts_tensor(a in state(5), b in state(5)) {
        let ab = tensor(&a, &b).unwrap();
        prop_assert!(max_diff(&partial_trace(&ab, Mode::B).unwrap(), &a) < 1e-12);
        prop_assert!(max_diff(&partial_trace(&ab, Mode::A).unwrap(), &b) < 1e-12);
    }

    #[test]
    fn wigner_is_linear(a in state(8), b in state(8), w in 0.0f64..1.0, x in -3.0f64..3.0, p in -3.0f64..3.0) {
        let mix = DensityOperator::mix(&[(w, &a), (1.0 - w, &b)]).unwrap();
        let lhs = wigner_at(&mix, x, p);
        let rhs = w * wigner_at(&a, x, p) + (1.0 - w) * wigner_at(&b, x, p);
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn gate_output_is_affine_in_xi(rho in state(10), t in 0.5f64..0.99, xi in 0.0f64..1.0) {
        let at = |x: f64| gate(&rho, &GateParams::new(t, x).unwrap().with_cutoff(10)).unwrap();
        let out = at(xi);
        prop_assert!((out.trace() - 1.0).abs() < 1e-12);
        prop_assert!(out.eigenvalues().iter().all(|&e| e > -1e-9));
        let (good, bad) = (at(1.0), at(0.0));
        let affine = DensityOperator::mix(&[(xi, &good), (1.0 - xi, &bad)]).unwrap();
        prop_assert!(max_diff(&out, &affine) < 1e-12);
    }

    #[test]
    fn loss_composes_multiplicatively(rho in state(10), t1 in 0.3f64..1.0, t2 in 0.3f64..1.0) {
        let twice = loss_channel(&loss_channel(&rho, t1).unwrap(), t2).unwrap();
        let once = loss_channel(&rho, t1 * t2).unwrap();
        prop_assert!(max_diff(&twice, &once) < 1e-12);
    }

    #[test]
    fn rotation_shifts_the_quadrature_phase(rho in state(8), theta in -3.0f64..3.0, phi in 0.0f64..6.3, x in -3.0f64..3.0) {
        let turned = quad_density(&rho.rotated(theta).unwrap(), phi).unwrap();
        let plain = quad_density(&rho, phi - theta).unwrap();
        prop_assert!((turned.pdf(x) - plain.pdf(x)).abs() < 1e-12);
    }

    #[test]
    fn bin_probabilities_form_a_distribution(rho in state(8), phi in 0.0f64..6.3) {
        let proj = BinProjectors::new(Binning::default(), 8);
        let probs = proj.probabilities(&rho, phi).unwrap();
        prop_assert!(probs.iter().all(|&p| p > -1e-12));
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
