use martinet::montgomery::{build_hamiltonian, Montgomery};
use martinet::oscillator::{GridSpec, Order};

// Reference values of the pure quartic oscillator.
const LAMBDA1_AT_0: f64 = 1.060_362_090_484_18;
const LAMBDA2_AT_0: f64 = 3.799_673_029_801_39;

fn norm(v: &[f64], dx: f64) -> f64 {
    (dx * v.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

#[test]
fn low_eigenvalues_at_zero() {
    let m = Montgomery::default();
    let grid = m.grid_for(0.0, 2);
    let pairs = m.eigenpairs(0.0, &grid, 2).unwrap();
    assert!((pairs[0].value - LAMBDA1_AT_0).abs() < 1e-8);
    assert!((pairs[1].value - LAMBDA2_AT_0).abs() < 1e-7);
    let dx = grid.spacing();
    let n = grid.points;
    for (p, sign) in pairs.iter().zip([1.0, -1.0]) {
        assert!((norm(&p.vector, dx) - 1.0).abs() < 1e-12);
        let mirror: Vec<f64> = (0..n).map(|i| p.vector[i] - sign * p.vector[n - 1 - i]).collect();
        assert!(norm(&mirror, dx) < 1e-8);
    }
}

#[test]
fn coarse_ritz_value_and_symmetry() {
    let grid = GridSpec::new(4.0, 64, Order::Second).unwrap();
    let a = build_hamiltonian(0.0, &grid).unwrap();
    let mut asym = 0.0_f64;
    for i in 0..a.dim() {
        for j in 0..a.dim() {
            asym = asym.max((a.get(i, j) - a.get(j, i)).abs());
        }
    }
    assert_eq!(asym, 0.0);
    let lowest = a.eigenvalue(0);
    assert!(((lowest - 1.0604) / 1.0604).abs() < 0.05);
}

#[test]
fn eigenvalues_are_simple_positive_and_ordered() {
    let m = Montgomery::default();
    for mu in [-2.0, -1.0, 0.0, 1.0] {
        let grid = m.grid_for(mu, 9);
        let pairs = m.eigenpairs(mu, &grid, 9).unwrap();
        assert!(pairs[0].value > 0.0);
        for w in pairs.windows(2) {
            assert!(w[1].value - w[0].value > 0.1, "mu {mu}");
        }
    }
}

#[test]
fn hellmann_feynman_examples() {
    let m = Montgomery::default();
    let grid = m.grid_for(0.0, 1);
    let slope = m.hf_derivative(0.0, 1, &grid).unwrap();
    let d = 1e-4;
    let fd = (m.eigenvalue_on(d, 1, &grid).unwrap() - m.eigenvalue_on(-d, 1, &grid).unwrap()) / (2.0 * d);
    assert!(slope > 0.0);
    assert!(((slope - fd) / fd).abs() < 1e-5);
    let far = m.grid_for(10.0, 1);
    let s10 = m.hf_derivative(10.0, 1, &far).unwrap();
    assert!((s10 - 20.0).abs() < 0.05 * 20.0);
}

#[test]
fn critical_point_examples() {
    let m = Montgomery::default();
    let cp = m.default_critical_point(1).unwrap();
    // Golden-section oracle over a 0.01 sweep of [-3, 1].
    assert!((cp.mu_star + 0.436_888_212_1).abs() < 1e-8);
    assert!((cp.value - 0.904_533_371_32).abs() < 1e-9);
    assert!(cp.value < m.eigenvalue(0.0, 1).unwrap());
    assert!(cp.second_derivative > 0.0);
    let grid = m.covering_grid(-3.0, 1.0, 1);
    assert!(m.hf_derivative(cp.mu_star, 1, &grid).unwrap().abs() < 1e-8);
    assert!(m.hf_derivative(cp.mu_star - 0.1, 1, &grid).unwrap() < 0.0);
    assert!(m.hf_derivative(cp.mu_star + 0.1, 1, &grid).unwrap() > 0.0);
}

#[test]
fn eigenvector_derivative_examples() {
    let m = Montgomery::default();
    let grid = m.grid_for(0.0, 40);
    let dx = grid.spacing();
    let d = m.eigvec_derivative(0.0, 1, &grid, 40).unwrap();
    assert!(d.residual < 1e-5);
    let phi = &m.state_on(0.0, 1, &grid).unwrap().vector;
    let overlap = dx * d.vector.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>();
    assert!(overlap.abs() < 1e-10);
    let h = 1e-3;
    let plus = m.state_on(h, 1, &grid).unwrap().vector;
    let minus = m.state_on(-h, 1, &grid).unwrap().vector;
    let diff: Vec<f64> = (0..grid.points)
        .map(|i| d.vector[i] - (plus[i] - minus[i]) / (2.0 * h))
        .collect();
    assert!(norm(&diff, dx) < 1e-4);
    let residuals: Vec<f64> = d.decay.iter().map(|r| r.1).collect();
    assert!(residuals.windows(2).take(4).all(|w| w[1] < w[0]));
}

#[test]
fn second_order_stencil_converges_quadratically() {
    let m = Montgomery::default();
    let errs: Vec<f64> = [256, 512, 1024]
        .iter()
        .map(|&n| {
            let g = GridSpec::new(8.0, n, Order::Second).unwrap();
            (m.eigenvalue_on(0.0, 1, &g).unwrap() - LAMBDA1_AT_0).abs()
        })
        .collect();
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    assert!(ratios.iter().all(|&r| r >= 4.0), "{ratios:?}");
}

#[test]
fn eigenvalues_grow_away_from_the_minimum() {
    let m = Montgomery::default();
    for k in [1, 2] {
        let mut prev_left = m.eigenvalue(-2.0, k).unwrap();
        let mut prev_right = m.eigenvalue(2.0, k).unwrap();
        for mu in [4.0, 8.0] {
            let left = m.eigenvalue(-mu, k).unwrap();
            let right = m.eigenvalue(mu, k).unwrap();
            assert!(left > prev_left && right > prev_right);
            prev_left = left;
            prev_right = right;
        }
    }
}
