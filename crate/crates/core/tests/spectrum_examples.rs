use martinet::spectrum::{Branch, Martinet, MartinetParams, ModeIndex};

const LAMBDA1_AT_0: f64 = 1.060_362_090_484_18;

fn p(eta: f64, zeta: f64, k: usize) -> MartinetParams {
    MartinetParams::new(eta, zeta, k).unwrap()
}

#[test]
fn unit_zeta_reduces_to_montgomery() {
    let m = Martinet::default();
    for mu in [-1.5, 0.0, 0.8] {
        for k in [1, 2] {
            let a = m.lambda(&p(mu, 1.0, k)).unwrap();
            assert_eq!(a, m.solver.eigenvalue(mu, k).unwrap());
            let d = m.lambda_direct(&p(mu, 1.0, k), None).unwrap();
            assert!(((a - d) / a).abs() < 1e-8);
        }
    }
    assert!((m.lambda(&p(0.0, 1.0, 1)).unwrap() - LAMBDA1_AT_0).abs() < 1e-8);
    assert!((m.lambda_direct(&p(0.0, 1.0, 1), None).unwrap() - LAMBDA1_AT_0).abs() < 1e-8);
}

#[test]
fn scaled_value_matches_direct_diagonalization() {
    let m = Martinet::default();
    let a = m.lambda(&p(0.7, 2.0, 1)).unwrap();
    let b = m.lambda_direct(&p(0.7, 2.0, 1), None).unwrap();
    assert!(((a - b) / b).abs() < 1e-6);
}

#[test]
fn sign_flip_of_zeta() {
    let m = Martinet::default();
    for (eta, zeta) in [(0.4, 1.3), (-1.1, 0.6)] {
        let a = m.lambda_direct(&p(eta, -zeta, 1), None).unwrap();
        let b = m.lambda_direct(&p(-eta, zeta, 1), None).unwrap();
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn homogeneity_examples() {
    let m = Martinet::default();
    assert_eq!(m.homogeneity_check(&p(0.3, 1.0, 1), 1.0).unwrap(), 0.0);
    assert!(m.homogeneity_check(&p(0.3, 1.0, 1), 2.0).unwrap() < 1e-10);
    assert!(m.homogeneity_check(&p(-1.0, 0.5, 2), 5.0).unwrap() < 1e-10);
    assert!(m.homogeneity_check(&p(-1.0, 0.5, 2), 0.0).is_err());
}

#[test]
fn transposed_exponent_form_disagrees_with_direct_solve() {
    let m = Martinet::default();
    let (n1, n2) = (3.0_f64, 2.0_f64);
    let direct = m.lambda_direct(&p(n1, n2, 1), None).unwrap();
    let main = m.lambda(&p(n1, n2, 1)).unwrap();
    let swapped = n1.abs().cbrt() * m.solver.eigenvalue(n2 * n1.signum() / n1.abs().powf(2.0 / 3.0), 1).unwrap();
    assert!(((main - direct) / direct).abs() < 1e-6);
    assert!(((swapped - direct) / direct).abs() > 0.1);
}

#[test]
fn critical_point_pair_examples() {
    let m = Martinet::default();
    let pts = m.critical_points(1).unwrap();
    let lam = pts[0].lambda_at_star;
    assert!(pts[0].zeta_j > 0.0);
    assert_eq!(pts[1].zeta_j, -pts[0].zeta_j);
    assert_eq!(pts[0].zeta_j, lam.powf(-1.5));
    assert_eq!(pts[0].eta_j, pts[0].mu_star * pts[0].zeta_j.abs().cbrt());
    assert_eq!(pts[1].eta_j, -pts[0].mu_star * pts[1].zeta_j.abs().cbrt());
    for pt in &pts {
        assert!(pt.level_residual.abs() < 1e-8);
        assert!(pt.slope.abs() < 1e-6);
        assert!(((pt.curvature - pt.second_derivative) / pt.second_derivative).abs() < 1e-4);
        let direct = m.lambda_direct(&p(pt.eta_j, pt.zeta_j, 1), None).unwrap();
        assert!((direct - 1.0).abs() < 1e-8);
    }
}

#[test]
fn level_curve_examples() {
    let m = Martinet::default();
    let pts = m.critical_points(1).unwrap();
    let z0 = pts[0].zeta_j;
    let tangent = m.level_curve(1, &[z0]).unwrap();
    assert_eq!(tangent.len(), 1);
    assert_eq!(tangent[0].branch, Branch::Tangent);
    assert!((tangent[0].eta - pts[0].eta_j).abs() < 1e-6);
    let below = m.level_curve(1, &[0.999 * z0]).unwrap();
    assert_eq!(below.len(), 2);
    assert!(m.level_curve(1, &[1.01 * z0]).unwrap().is_empty());
    let unit = m.level_curve(1, &[1.0]).unwrap();
    assert_eq!(unit.len(), 2);
    assert!(unit.iter().any(|q| q.branch == Branch::Left) && unit.iter().any(|q| q.branch == Branch::Right));
    for q in &unit {
        let direct = m.lambda_direct(&p(q.eta, q.zeta, 1), None).unwrap();
        assert!((direct - 1.0).abs() < 1e-6, "{q:?}");
    }
    let mut etas: Vec<f64> = unit.iter().map(|q| q.eta).collect();
    etas.sort_by(f64::total_cmp);
    assert!((etas[0] + 0.791_86).abs() < 1e-4 && (etas[1] + 0.093_79).abs() < 1e-4);
}

#[test]
fn spectrum_examples() {
    let m = Martinet::default();
    let lines = m.enumerate_spectrum(10.0).unwrap();
    let ground: Vec<_> = lines.iter().filter(|l| l.mode.n1 == 0 && l.mode.n2.abs() == 1 && l.mode.k == 1).collect();
    assert_eq!(ground.len(), 2);
    for g in ground {
        assert!((g.energy - LAMBDA1_AT_0).abs() < 1e-8);
    }
    for l in &lines {
        let mirror = lines
            .iter()
            .find(|o| o.mode.n1 == -l.mode.n1 && o.mode.n2 == -l.mode.n2 && o.mode.k == l.mode.k)
            .unwrap();
        assert!((mirror.energy - l.energy).abs() < 1e-10);
        assert!(l.energy <= 10.0);
        assert!((l.lambda() - l.energy.sqrt()).abs() == 0.0);
    }
    assert!(lines.windows(2).all(|w| w[0].energy <= w[1].energy));
    assert_eq!(lines.len(), 536);
}

#[test]
fn rs_diagnostics_examples() {
    let m = Martinet::default();
    let mut max_first_three = 0.0_f64;
    for j in 1..=200 {
        let mode = ModeIndex::new(0, j, 1).unwrap();
        let r = m.rs_diagnostics(&mode).unwrap();
        assert!((r.rs_norms[0].powi(2) + r.rs_norms[1].powi(2) - 1.0).abs() < 1e-8);
        assert_eq!(r.rs_norms[3], 2.0 * r.h.powi(3) * j as f64);
        assert!((m.lambda(&p(r.eta_bar, r.zeta_bar, 1)).unwrap() - 1.0).abs() < 1e-8);
        max_first_three = max_first_three.max(r.rs_norms[0]).max(r.rs_norms[1]).max(r.rs_norms[2]);
        // rs4 = 2/Λ₁(0)^{3/2} ≈ 1.832 for every j.
        assert!((r.rs_norms[3] - 2.0 * LAMBDA1_AT_0.powf(-1.5)).abs() < 1e-8);
    }
    assert!(max_first_three <= 1.5);
}

#[test]
fn invalid_inputs() {
    assert!(ModeIndex::new(1, 0, 1).is_err());
    assert!(ModeIndex::new(1, 1, 0).is_err());
    assert!(MartinetParams::new(0.0, 0.0, 1).is_err());
    assert!(Martinet::default().enumerate_spectrum(-1.0).is_err());
}
