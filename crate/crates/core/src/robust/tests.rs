use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::cxla::{eigenvalues, ComplexMatrix, C64};
use crate::exec::Sequential;
use crate::model::{
    AffineMatrixFamily, ChannelStructure, ComplexInterval, Interval, PerturbationStructure,
};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn m(rows: &[&[f64]]) -> ComplexMatrix {
    ComplexMatrix::from_real_rows(rows)
}

fn full_structure(sys: &mut LpvSystem) {
    let q = sys.q();
    sys.pert = PerturbationStructure::new(
        ChannelStructure::unstructured(q[0], sys.n, sys.n),
        ChannelStructure::unstructured(q[1], sys.n, sys.m),
        ChannelStructure::unstructured(q[2], sys.p, sys.n),
        ChannelStructure::unstructured(q[3], sys.p, sys.m),
    );
}

fn scalar(b: f64) -> LpvSystem {
    let mut s = LpvSystem::constant(m(&[&[-1.0]]), m(&[&[b]]), m(&[&[1.0]]), m(&[&[0.0]])).unwrap();
    full_structure(&mut s);
    s
}

/// Full structure on every channel for the given families.
fn lpv(a: AffineMatrixFamily, b: AffineMatrixFamily, cm: AffineMatrixFamily, d: AffineMatrixFamily) -> LpvSystem {
    let (n, mm, p) = (a.shape().0, b.shape().1, cm.shape().0);
    let pert = PerturbationStructure::new(
        ChannelStructure::unstructured(a.q(), n, n),
        ChannelStructure::unstructured(b.q(), n, mm),
        ChannelStructure::unstructured(cm.q(), p, n),
        ChannelStructure::unstructured(d.q(), p, mm),
    );
    LpvSystem::new(a, b, cm, d, pert).unwrap()
}

fn singleton(sys: &LpvSystem) -> BoxDomain {
    BoxDomain::singleton(&sys.origin())
}

fn rand_m(rng: &mut ChaCha8Rng, r: usize, cols: usize, complex: bool) -> ComplexMatrix {
    let data = (0..r * cols)
        .map(|_| {
            let im = if complex { rng.gen_range(-1.0..1.0) } else { 0.0 };
            c(rng.gen_range(-1.0..1.0), im)
        })
        .collect();
    ComplexMatrix::from_vec(r, cols, data).unwrap()
}

/// Random Δ on every channel, scaled to stacked norm `target`.
fn random_delta(rng: &mut ChaCha8Rng, sys: &LpvSystem, property: Property, target: f64) -> DeltaAssignment {
    let mut d = sys.zero_delta();
    for blk in d.deltas.iter_mut().flatten().flatten() {
        *blk = rand_m(rng, blk.rows(), blk.cols(), true);
    }
    let n = stacked_norm(sys, property, &d).unwrap();
    d.scale(target / n)
}

/// Gram-matrix extremes from Hermitian eigenvalues, independent of the SVD.
fn gram_extremes(z: &ComplexMatrix) -> (f64, f64) {
    let g = if z.rows() <= z.cols() {
        z.try_mul(&z.adjoint()).unwrap()
    } else {
        z.adjoint().try_mul(z).unwrap()
    };
    let ev: Vec<f64> = eigenvalues(&g).unwrap().iter().map(|l| l.re).collect();
    (
        ev.iter().copied().fold(f64::INFINITY, f64::min),
        ev.iter().copied().fold(0.0, f64::max),
    )
}

#[test]
fn scalar_constants_and_radius() {
    let s = scalar(1.0);
    let d = singleton(&s);
    let k = bound_constants(&s, &d, Property::Controllability, &RadiusOptions::default(), &Sequential).unwrap();
    assert!((k.eps_c0 - 2.0).abs() < 1e-12);
    assert_eq!(k.eps_omega, 0.0);
    assert!((k.omega - 4.0).abs() < 1e-15);
    assert!((k.delta_c0 - 18.0).abs() < 1e-12);
    assert!(k.half_axis);

    let r = preservation_radius(&s, &d, Property::Controllability, &RadiusOptions::default(), &Sequential).unwrap();
    let expected = libm::sqrt(326.0) - 18.0;
    assert!((r.delta - expected).abs() < 1e-12);
    assert!((r.block_bound - expected / libm::sqrt(2.0)).abs() < 1e-12);
    assert_eq!(r.tuple_norm_sqr, 2.0);
    assert!(r.eps_c0 <= r.delta_c0);
}

#[test]
fn scaled_input_raises_eps() {
    let s = scalar(10.0);
    let k = bound_constants(&s, &singleton(&s), Property::Controllability, &RadiusOptions::default(), &Sequential)
        .unwrap();
    assert!((k.eps_c0 - 101.0).abs() < 1e-9);
}

#[test]
fn zero_input_fails_nominally() {
    let s = scalar(0.0);
    let r = preservation_radius(&s, &singleton(&s), Property::Controllability, &RadiusOptions::default(), &Sequential);
    assert_eq!(r.unwrap_err(), Error::NominalPropertyFails);
}

#[test]
fn unsupported_and_unbounded() {
    let s = scalar(1.0);
    let o = RadiusOptions::default();
    assert!(matches!(
        preservation_radius(&s, &singleton(&s), Property::OutputControllability, &o, &Sequential),
        Err(Error::UnsupportedProperty(_))
    ));
    let lpv = lpv(
        AffineMatrixFamily::new(vec![m(&[&[-1.0]]), m(&[&[1.0]])]).unwrap(),
        AffineMatrixFamily::constant(m(&[&[1.0]])),
        AffineMatrixFamily::constant(m(&[&[1.0]])),
        AffineMatrixFamily::constant(m(&[&[0.0]])),
    );
    let d = BoxDomain::new(
        vec![ComplexInterval::real(Interval { lo: 0.0, hi: f64::INFINITY })],
        vec![],
        vec![],
        vec![],
    );
    assert_eq!(
        preservation_radius(&lpv, &d, Property::Controllability, &o, &Sequential).unwrap_err(),
        Error::UnboundedDomain
    );
}

#[test]
fn lifted_bound_limits() {
    assert_eq!(lifted_bound(0.0, 5.0), 0.0);
    assert!(lifted_bound(1e-300, 5.0) < 1e-299);
}

proptest! {
    #[test]
    fn lifted_bound_solves_its_quadratic(eps in 1e-6f64..1e3, extra in 0.0f64..1e3) {
        let dc = eps + extra;
        let d = lifted_bound(eps, dc);
        prop_assert!((d * d + 2.0 * dc * d - eps).abs() < 1e-9 * eps.max(1.0));
        prop_assert!(d > 0.0);
    }
}

#[test]
fn admissibility_examples() {
    let s = scalar(1.0);
    let r = preservation_radius(&s, &singleton(&s), Property::Controllability, &RadiusOptions::default(), &Sequential)
        .unwrap();
    assert!(is_admissible(&s, &s.zero_delta(), &r).unwrap());
    let mut d = s.zero_delta();
    *d.block_mut(Channel::A, 0, 0) = m(&[&[0.039]]);
    assert!(is_admissible(&s, &d, &r).unwrap());
    *d.block_mut(Channel::A, 0, 0) = m(&[&[1.0]]);
    assert!(!is_admissible(&s, &d, &r).unwrap());
}

fn lpv_example() -> (LpvSystem, BoxDomain) {
    let s = lpv(
        AffineMatrixFamily::new(vec![m(&[&[-1.0, 0.5], &[0.0, -2.0]]), m(&[&[0.0, 1.0], &[0.0, 0.0]])]).unwrap(),
        AffineMatrixFamily::new(vec![m(&[&[1.0], &[1.0]]), m(&[&[0.0], &[0.5]])]).unwrap(),
        AffineMatrixFamily::constant(m(&[&[1.0, 0.0]])),
        AffineMatrixFamily::constant(m(&[&[0.0]])),
    );
    let d = BoxDomain::new(
        vec![ComplexInterval::real(Interval { lo: -0.5, hi: 0.5 })],
        vec![ComplexInterval::real(Interval { lo: 0.0, hi: 1.0 })],
        vec![],
        vec![],
    );
    (s, d)
}

#[test]
fn constants_match_gram_eigenvalue_oracle() {
    let (s, d) = lpv_example();
    let o = RadiusOptions {
        grid: 5,
        omega_points: 41,
        ..RadiusOptions::default()
    };
    let k = bound_constants(&s, &d, Property::Controllability, &o, &Sequential).unwrap();

    let k_axis: Vec<Vec<f64>> = vec![Interval { lo: -0.5, hi: 0.5 }.samples(5), Interval { lo: 0.0, hi: 1.0 }.samples(5)];
    let mut sup_a: f64 = 0.0;
    for &za in &k_axis[0] {
        for &zb in &k_axis[1] {
            let on_edge = za == -0.5 || za == 0.5 || zb == 0.0 || zb == 1.0;
            let p = ParameterPoint::new(vec![c(za, 0.0)], vec![c(zb, 0.0)], vec![], vec![]);
            let a = s.nominal(Channel::A, &p).unwrap();
            let (_, amax) = gram_extremes(&a);
            if on_edge {
                sup_a = sup_a.max(libm::sqrt(amax));
            }
        }
    }
    let omega = 2.0 * (1.0 + sup_a);
    assert!((k.omega - omega).abs() < 1e-9 * omega);

    let mut eps = f64::INFINITY;
    let mut dc: f64 = 0.0;
    for &za in &k_axis[0] {
        for &zb in &k_axis[1] {
            let on_edge = za == -0.5 || za == 0.5 || zb == 0.0 || zb == 1.0;
            let p = ParameterPoint::new(vec![c(za, 0.0)], vec![c(zb, 0.0)], vec![], vec![]);
            let a = s.nominal(Channel::A, &p).unwrap();
            let b = s.nominal(Channel::B, &p).unwrap();
            for w in 0..=20 {
                let om = k.omega * w as f64 / 20.0;
                let mut z = a.scale(c(-1.0, 0.0));
                for i in 0..2 {
                    z[(i, i)] += c(0.0, om);
                }
                let (lo, hi) = gram_extremes(&z.hstack(&b).unwrap());
                eps = eps.min(lo);
                if on_edge {
                    dc = dc.max(hi);
                }
            }
        }
    }
    assert!((k.eps_c0 - eps).abs() < 1e-8 * eps.max(1.0), "{} vs {}", k.eps_c0, eps);
    assert!((k.delta_c0 - dc).abs() < 1e-8 * dc, "{} vs {}", k.delta_c0, dc);
}

#[test]
fn sampled_soundness_scalar_and_lpv() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let o = RadiusOptions::default();
    let check = CheckOptions::default();

    let s = scalar(1.0);
    let d = singleton(&s);
    let r = preservation_radius(&s, &d, Property::Controllability, &o, &Sequential).unwrap();
    let deltas: Vec<_> = (0..100)
        .map(|_| {
            let t = 0.99 * r.block_bound * rng.gen::<f64>();
            random_delta(&mut rng, &s, Property::Controllability, t)
        })
        .collect();
    let pts = vec![s.origin(); 20];
    let res = verify_sampled(&s, &r, &deltas, &pts, &check, &Sequential).unwrap();
    assert_eq!(res.samples, 100);
    assert!(res.failures.is_empty());

    let (s, d) = lpv_example();
    let r = preservation_radius(&s, &d, Property::Controllability, &o, &Sequential).unwrap();
    let deltas: Vec<_> = (0..100)
        .map(|_| random_delta(&mut rng, &s, Property::Controllability, 0.99 * r.block_bound))
        .collect();
    let pts: Vec<_> = (0..20)
        .map(|_| {
            ParameterPoint::new(
                vec![c(rng.gen_range(-0.5..=0.5), 0.0)],
                vec![c(rng.gen_range(0.0..=1.0), 0.0)],
                vec![],
                vec![],
            )
        })
        .collect();
    let res = verify_sampled(&s, &r, &deltas, &pts, &check, &Sequential).unwrap();
    assert_eq!((res.samples, res.skipped_inadmissible), (100, 0));
    assert!(res.failures.is_empty());
}

#[test]
fn observability_radius_is_dual_controllability_radius() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let o = RadiusOptions {
        omega_points: 61,
        ..RadiusOptions::default()
    };
    let mut compared = 0;
    for t in 0..20 {
        let complex = t % 2 == 1;
        let n = 1 + t % 3;
        let a = rand_m(&mut rng, n, n, complex).scale(c(2.0, 0.0));
        let b = rand_m(&mut rng, n, 1, complex);
        let cm = rand_m(&mut rng, 1 + t % 2, n, complex);
        let d = ComplexMatrix::zeros(cm.rows(), 1);
        let mut s = LpvSystem::constant(a, b, cm, d).unwrap();
        full_structure(&mut s);
        let dom = singleton(&s);
        let obs = preservation_radius(&s, &dom, Property::Observability, &o, &Sequential);
        let dual = s.dual();
        let ctrb = preservation_radius(&dual, &dom.dual(), Property::Controllability, &o, &Sequential);
        match (obs, ctrb) {
            (Ok(x), Ok(y)) => {
                assert!((x.delta - y.delta).abs() < 1e-9);
                assert!((x.block_bound - y.block_bound).abs() < 1e-9);
                compared += 1;

                // Direct oracle on [iωI − A; C].
                let am = s.nominal(Channel::A, &s.origin()).unwrap();
                let cmat = s.nominal(Channel::C, &s.origin()).unwrap();
                let mut eps = f64::INFINITY;
                for w in -30..=30 {
                    let om = x.omega_truncation * w as f64 / 30.0;
                    let mut z = am.scale(c(-1.0, 0.0));
                    for i in 0..n {
                        z[(i, i)] += c(0.0, om);
                    }
                    eps = eps.min(gram_extremes(&z.vstack(&cmat).unwrap()).0);
                }
                assert!((x.eps_c0 - eps).abs() < 1e-8 * eps.max(1.0));
            }
            (Err(e1), Err(e2)) => assert_eq!(e1, e2),
            (x, y) => panic!("mismatch {x:?} {y:?}"),
        }
    }
    assert!(compared >= 10);
}

#[test]
fn minimality_radius_is_the_smaller_one() {
    let s = LpvSystem::constant(
        m(&[&[-1.0, 0.0], &[0.0, -2.0]]),
        m(&[&[1.0], &[1.0]]),
        m(&[&[3.0, 1.0]]),
        m(&[&[0.0]]),
    )
    .unwrap();
    let mut s = s;
    full_structure(&mut s);
    let d = singleton(&s);
    let o = RadiusOptions::default();
    let c1 = preservation_radius(&s, &d, Property::Controllability, &o, &Sequential).unwrap();
    let o1 = preservation_radius(&s, &d, Property::Observability, &o, &Sequential).unwrap();
    let mi = preservation_radius(&s, &d, Property::Minimality, &o, &Sequential).unwrap();
    assert_eq!(mi.block_bound, c1.block_bound.min(o1.block_bound));
    assert_eq!(mi.property, Property::Minimality);
}

fn diag_example(b: ComplexMatrix, cm: ComplexMatrix) -> LpvSystem {
    let mut s = LpvSystem::constant(m(&[&[-1.0, 0.0], &[0.0, -2.0]]), b, cm, ComplexMatrix::zeros(1, 1)).unwrap();
    full_structure(&mut s);
    s
}

#[test]
fn violation_by_input_projection() {
    let s = diag_example(m(&[&[1.0], &[1.0]]), m(&[&[1.0, 1.0]]));
    let d = singleton(&s);
    let o = RadiusOptions::default();
    let w = construct_violation(&s, &d, Property::Controllability, &o, &Sequential).unwrap();
    assert_eq!(w.method, ViolationMethod::EigenvectorProjection);
    let bt = s.perturbation(Channel::B, &w.point, &w.delta).unwrap();
    let first = (bt.max_abs_diff(&m(&[&[-1.0], &[0.0]])) < 1e-9 && (w.s0 - c(-1.0, 0.0)).norm() < 1e-9)
        || (bt.max_abs_diff(&m(&[&[0.0], &[-1.0]])) < 1e-9 && (w.s0 - c(-2.0, 0.0)).norm() < 1e-9);
    assert!(first, "{bt:?} at {}", w.s0);
    assert!((w.norm - 1.0).abs() < 1e-9);
    assert!(s.perturbation(Channel::A, &w.point, &w.delta).unwrap().max_abs() < 1e-12);

    let z = assemble_pbh(&s, PbhKind::Controllability, w.s0, &w.point, &w.delta).unwrap();
    assert_eq!(crate::cxla::numerical_rank(&z, 1e-8).unwrap(), 1);
    assert!(w.sigma_min <= w.threshold);

    let r = preservation_radius(&s, &d, Property::Controllability, &o, &Sequential).unwrap();
    assert!(w.norm > r.block_bound);
}

#[test]
fn violation_by_output_projection() {
    let s = diag_example(m(&[&[1.0], &[1.0]]), m(&[&[1.0, 1.0]]));
    let w = construct_violation(&s, &singleton(&s), Property::Observability, &RadiusOptions::default(), &Sequential)
        .unwrap();
    let ct = s.perturbation(Channel::C, &w.point, &w.delta).unwrap();
    assert!((w.norm - 1.0).abs() < 1e-9);
    assert!(ct.max_abs_diff(&m(&[&[-1.0, 0.0]])) < 1e-9 || ct.max_abs_diff(&m(&[&[0.0, -1.0]])) < 1e-9);
    let v = check_property_at(&s, Property::Observability, &w.point, &w.delta, &CheckOptions::default()).unwrap();
    assert!(!v.holds);
}

#[test]
fn violation_through_state_matrix_only() {
    let mut s = LpvSystem::constant(
        m(&[&[0.0, 1.0], &[0.0, 0.0]]),
        m(&[&[0.0], &[1.0]]),
        m(&[&[1.0, 0.0]]),
        m(&[&[0.0]]),
    )
    .unwrap();
    s.pert = PerturbationStructure::new(
        ChannelStructure::unstructured(0, 2, 2),
        ChannelStructure::empty(0, 1),
        ChannelStructure::empty(0, 2),
        ChannelStructure::empty(0, 1),
    );
    let w = construct_violation(&s, &singleton(&s), Property::Controllability, &RadiusOptions::default(), &Sequential)
        .unwrap();
    assert_eq!(w.method, ViolationMethod::NullSpaceEigenvalue);
    assert!((w.norm - 1.0).abs() < 1e-9);
    assert!(w.s0.norm() < 1e-12);
}

#[test]
fn unperturbable_input_is_not_expressible() {
    let mut s = scalar(1.0);
    s.pert = PerturbationStructure::new(
        ChannelStructure::unstructured(0, 1, 1),
        ChannelStructure {
            blocks: vec![vec![m(&[&[1.0]])]],
            e: m(&[&[0.0]]),
        },
        ChannelStructure::empty(0, 1),
        ChannelStructure::empty(0, 1),
    );
    let e = construct_violation(&s, &singleton(&s), Property::Controllability, &RadiusOptions::default(), &Sequential)
        .unwrap_err();
    assert_eq!(e, Error::NotExpressible);
}

#[test]
fn uncontrollable_nominal_is_reported() {
    let s = diag_example(m(&[&[1.0], &[0.0]]), m(&[&[1.0, 1.0]]));
    let e = construct_violation(&s, &singleton(&s), Property::Controllability, &RadiusOptions::default(), &Sequential)
        .unwrap_err();
    assert_eq!(e, Error::NominalAlreadyViolated);
}

#[test]
fn stabilizability_violation_targets_closed_right_half_plane() {
    let mut s = LpvSystem::constant(
        m(&[&[1.0, 0.0], &[0.0, -1.0]]),
        m(&[&[1.0], &[1.0]]),
        m(&[&[1.0, 1.0]]),
        m(&[&[0.0]]),
    )
    .unwrap();
    full_structure(&mut s);
    let w = construct_violation(&s, &singleton(&s), Property::Stabilizability, &RadiusOptions::default(), &Sequential)
        .unwrap();
    assert!(w.s0.re >= 0.0);
    let v = check_property_at(&s, Property::Stabilizability, &w.point, &w.delta, &CheckOptions::default()).unwrap();
    assert!(!v.holds);
}

// The radius only samples the imaginary axis; a nearly uncontrollable mode
// far in the left half plane is cheaper to destroy than the bound suggests.
#[test]
fn far_left_mode_can_undercut_the_radius() {
    let mut s = LpvSystem::constant(
        m(&[&[-1.0, 0.0], &[0.0, -100.0]]),
        m(&[&[1.0], &[5e-6]]),
        m(&[&[1.0, 1.0]]),
        m(&[&[0.0]]),
    )
    .unwrap();
    full_structure(&mut s);
    let d = singleton(&s);
    let o = RadiusOptions::default();
    let r = preservation_radius(&s, &d, Property::Controllability, &o, &Sequential).unwrap();
    let w = construct_violation(&s, &d, Property::Controllability, &o, &Sequential).unwrap();
    assert!(w.norm < r.block_bound);
    assert!(is_admissible(&s, &w.delta, &r).unwrap());
}
