use faer::Mat;
use fracfk::harness::{build_example, Example};
use fracfk::par::Execution;
use fracfk::reference::{
    eigenmode_solution, fine_step_oracle, inhomogeneous_eigenmode_solution, mittag_leffler, modal_final_value,
};
use fracfk::spatial::{dirichlet_eigenfunction, fractional_power, sine_operator, SpectralOperator};
use fracfk::stepper::{run, run_corrected, run_standard, ProblemSpec, Scheme};
use fracfk::quadrature::{correction_table, WeightSet};
use std::sync::Arc;

/// 1x1 operator with the single eigenvalue `lambda`.
fn scalar_op(lambda: f64) -> SpectralOperator {
    let l = Mat::from_fn(1, 1, |_, _| lambda * lambda);
    fractional_power(&l, vec![0.0], 1.0).unwrap()
}

fn first_mode_problem(op: &SpectralOperator, gamma: f64, sigma: f64) -> ProblemSpec {
    let g0 = op.nodes().iter().map(|&x| dirichlet_eigenfunction(1, x)).collect();
    ProblemSpec::homogeneous(op.alpha(), gamma, sigma, 1.0, g0)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn rel_to_mode(got: &[f64], nodes: &[f64], coef: f64) -> f64 {
    let exact: Vec<f64> = nodes.iter().map(|&x| coef * dirichlet_eigenfunction(1, x)).collect();
    let diff: Vec<f64> = got.iter().zip(&exact).map(|(a, b)| a - b).collect();
    max_abs(&diff) / max_abs(&exact)
}

#[test]
fn corrected_bdf3_matches_mittag_leffler_mode() {
    let (gamma, sigma, alpha) = (0.7, 0.5, 1.3);
    let op = sine_operator(31, 32, alpha).unwrap();
    let p = first_mode_problem(&op, gamma, sigma);
    let tr = run_corrected(&p, &op, 3, 320).unwrap();
    let coef = eigenmode_solution(op.eigenvalues()[0], gamma, sigma, 1.0, 1.0).unwrap();
    let err = rel_to_mode(tr.last(), op.nodes(), coef);
    assert!(err <= 1e-6, "relative error {err:e}");
}

#[test]
fn orders_on_eigenmode_problem() {
    for (gamma, alpha) in [(0.3, 1.7), (0.7, 1.3)] {
        let sigma = 0.5;
        let op = sine_operator(15, 16, alpha).unwrap();
        let p = first_mode_problem(&op, gamma, sigma);
        let lam = op.eigenvalues()[0];
        for k in 1..=4 {
            let mut errs = Vec::new();
            for n in [40usize, 80, 160, 320] {
                let tr = run_corrected(&p, &op, k, n).unwrap();
                let mut worst = 0.0f64;
                // The error bound carries t^-k, so compare on a fixed window away from t = 0.
                for (s, g) in tr.values.iter().enumerate().skip(n / 2) {
                    let coef = eigenmode_solution(lam, gamma, sigma, tr.time(s), 1.0).unwrap();
                    worst = worst.max(rel_to_mode(g, op.nodes(), coef) * coef.abs());
                }
                errs.push(worst);
            }
            let r = (errs[2] / errs[3]).log2();
            assert!((r - k as f64).abs() <= 0.2, "gamma={gamma} k={k}: errors {errs:?} rate {r}");
        }
    }
}

#[test]
fn standard_scheme_is_first_order_on_nonsmooth_data() {
    let op = SpectralOperator::chebyshev(24, 1.7).unwrap();
    let p = build_example(Example::A, &op, 0.3, 0.5, 1.0);
    for k in 2..=4 {
        let finals: Vec<Vec<f64>> = [40, 80, 160]
            .iter()
            .map(|&n| run_standard(&p, &op, k, n).unwrap().last().to_vec())
            .collect();
        let d = |a: &[f64], b: &[f64]| max_abs(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
        let r = (d(&finals[0], &finals[1]) / d(&finals[1], &finals[2])).log2();
        assert!((r - 1.0).abs() < 0.1, "k={k} rate {r}");
    }
}

#[test]
fn plug_back_residual() {
    let op = SpectralOperator::chebyshev(20, 1.3).unwrap();
    let p = build_example(Example::C, &op, 0.7, 0.5, 1.0);
    for scheme in [Scheme::Standard, Scheme::Corrected] {
        let k = 4;
        let n = 64;
        let tr = run(&p, &op, scheme, k, n).unwrap();
        let w = WeightSet::new(k, p.gamma, p.sigma, tr.tau, n).unwrap();
        let table = correction_table(k).unwrap();
        let ag0 = op.apply(&p.g0);
        let shifted: Vec<Vec<f64>> = tr
            .values
            .iter()
            .enumerate()
            .map(|(s, g)| {
                let d = (-p.sigma * tr.time(s)).exp();
                g.iter().zip(&p.g0).map(|(a, b)| a - d * b).collect()
            })
            .collect();
        for s in 1..=n {
            let t = tr.time(s);
            let ag = op.apply(&tr.values[s]);
            let f = p.forcing_at(t);
            let mut res = vec![0.0; op.dim()];
            for i in 0..op.dim() {
                let mut conv = 0.0;
                for j in 0..=s {
                    conv += w.q[j] * shifted[s - j][i];
                }
                res[i] = w.scale() * conv + ag[i] - f[i];
                if scheme == Scheme::Corrected && s < k {
                    let d = (-p.sigma * t).exp();
                    res[i] -= -table.a[s - 1] * d * ag0[i] + table.b[s - 1] * p.f_derivs0[0][i];
                    for (l, row) in table.d.iter().enumerate() {
                        res[i] -= row[s - 1] * tr.tau.powi(l as i32 + 1) * p.f_derivs0[l + 1][i];
                    }
                }
            }
            let bound = 1e-9 * (max_abs(&ag) + max_abs(&f));
            assert!(max_abs(&res) <= bound, "{scheme:?} step {s}: {:e} > {bound:e}", max_abs(&res));
        }
    }
}

#[test]
fn eigenmodes_do_not_mix() {
    let op = sine_operator(15, 16, 1.5).unwrap();
    for j in [1usize, 4, 9] {
        let phi: Vec<f64> = op.nodes().iter().map(|&x| dirichlet_eigenfunction(j, x)).collect();
        let p = ProblemSpec::homogeneous(1.5, 0.4, 0.5, 1.0, phi.clone());
        let tr = run_corrected(&p, &op, 5, 50).unwrap();
        let norm2: f64 = phi.iter().map(|v| v * v).sum();
        for g in &tr.values {
            let c: f64 = g.iter().zip(&phi).map(|(a, b)| a * b).sum::<f64>() / norm2;
            let off = max_abs(&g.iter().zip(&phi).map(|(a, b)| a - c * b).collect::<Vec<_>>());
            assert!(off <= 1e-12 * max_abs(g).max(1e-300), "mode {j}: {off:e}");
        }
    }
}

#[test]
fn mittag_leffler_identities() {
    assert!((mittag_leffler(0.5, 1.0, -1.0).unwrap() - 0.427_583_576_155_807).abs() < 1e-14);
    assert!((mittag_leffler(1.0, 1.0, -1.0).unwrap() - 0.36787944117144233).abs() < 1e-16);
}

#[test]
fn fine_oracle_matches_homogeneous_mode() {
    let op = scalar_op(2.0);
    let p = ProblemSpec::homogeneous(1.0, 0.3, 0.5, 1.0, vec![1.0]);
    let exact = eigenmode_solution(2.0, 0.3, 0.5, 1.0, 1.0).unwrap();
    let fine = fine_step_oracle(&p, &op, 1.0).unwrap()[0];
    assert!((fine - exact).abs() <= 1e-7 * exact.abs(), "{fine} vs {exact}");
}

#[test]
fn inhomogeneous_mode_matches_fine_bdf3() {
    let (gamma, sigma, lam) = (0.7, 0.5, 3.0);
    let op = scalar_op(lam);
    let mut p = ProblemSpec::homogeneous(1.0, gamma, sigma, 1.0, vec![0.0]);
    p.forcing = Arc::new(|_, t: f64| (t + 1.0).powi(5));
    p.f_derivs0 = vec![vec![1.0], vec![5.0], vec![20.0], vec![60.0], vec![120.0]];
    let exact = inhomogeneous_eigenmode_solution(lam, gamma, sigma, 1.0, 0.0, |s| (s + 1.0).powi(5)).unwrap();
    let fine = modal_final_value(&p, &op, Scheme::Corrected, 3, 20_480, 1.0, Execution::Sequential).unwrap()[0];
    assert!((fine - exact).abs() <= 1e-6 * exact.abs(), "{fine} vs {exact}");
}

#[test]
fn oracle_triangle_on_first_mode() {
    let (gamma, sigma, alpha) = (0.3, 0.5, 1.7);
    let op = sine_operator(15, 16, alpha).unwrap();
    let p = first_mode_problem(&op, gamma, sigma);
    let coef = eigenmode_solution(op.eigenvalues()[0], gamma, sigma, 1.0, 1.0).unwrap();
    let fine = fine_step_oracle(&p, &op, 1.0).unwrap();
    let stepped = run_corrected(&p, &op, 4, 320).unwrap();
    assert!(rel_to_mode(&fine, op.nodes(), coef) <= 1e-7);
    assert!(rel_to_mode(stepped.last(), op.nodes(), coef) <= 1e-7);
    let gap = max_abs(&fine.iter().zip(stepped.last()).map(|(a, b)| a - b).collect::<Vec<_>>());
    assert!(gap <= 2e-7 * max_abs(&fine));
}

#[test]
fn fine_oracle_on_example_a() {
    let op = SpectralOperator::chebyshev(16, 1.7).unwrap();
    let p = build_example(Example::A, &op, 0.3, 0.5, 1.0);
    let fine = fine_step_oracle(&p, &op, 1.0).unwrap();
    let coarse = run_corrected(&p, &op, 4, 320).unwrap();
    let gap = max_abs(&fine.iter().zip(coarse.last()).map(|(a, b)| a - b).collect::<Vec<_>>());
    assert!(gap < 1e-8, "{gap:e}");
    let zero = ProblemSpec::homogeneous(1.7, 0.3, 0.5, 1.0, vec![0.0; op.dim()]);
    assert!(fine_step_oracle(&zero, &op, 1.0).unwrap().iter().all(|&v| v == 0.0));
}
