use num_complex::Complex64;
use proptest::prelude::*;
use spikesketch::sketch::SpectralAtoms;
use spikesketch::theory::{
    bulk_edge_general, bulk_edge_iid, classic_cos2_forward, classic_spike_forward, effective_xi_countsketch,
    find_spike_master, g2c_closed, m2c_closed_real, mp_edges, predict_iid, predict_orthogonal_family,
    solve_cubic_m1c, solve_self_consistent, AspectRatios, Detection,
};

/// `atoms` equal-weight quantile midpoints of the MP law of `SSᵀ` with ratio `xi`.
fn mp_atoms(xi: f64, atoms: usize) -> SpectralAtoms {
    let (lo, hi) = mp_edges(xi);
    let density = |x: f64| ((hi - x) * (x - lo)).max(0.0).sqrt() / (2.0 * std::f64::consts::PI * xi * x);
    let grid = 200_000;
    let h = (hi - lo) / grid as f64;
    let mut cdf = Vec::with_capacity(grid + 1);
    let mut acc = 0.0;
    cdf.push(0.0);
    for i in 0..grid {
        let a = lo + i as f64 * h;
        acc += 0.5 * h * (density(a) + density(a + h));
        cdf.push(acc);
    }
    let total = acc;
    let mut out = Vec::with_capacity(atoms);
    let mut j = 0;
    for i in 0..atoms {
        let q = (i as f64 + 0.5) / atoms as f64 * total;
        while cdf[j + 1] < q {
            j += 1;
        }
        let t = (q - cdf[j]) / (cdf[j + 1] - cdf[j]);
        out.push(lo + (j as f64 + t) * h);
    }
    SpectralAtoms::from_eigenvalues(&out).unwrap()
}

#[test]
fn discretized_mp_matches_cubic() {
    for (gamma, xi) in [(0.2, 0.1), (0.2, 0.5), (0.5, 0.3)] {
        let ar = AspectRatios::new(gamma, xi).unwrap();
        let z = bulk_edge_iid(ar).unwrap().lambda_plus + 1.0;
        let exact = solve_cubic_m1c(z, ar).unwrap();
        let sol = solve_self_consistent(Complex64::new(z, 0.0), &SpectralAtoms::point(1.0), &mp_atoms(xi, 500), ar)
            .unwrap();
        assert!((sol.m1c.re - exact).abs() <= 5e-3, "γ={gamma} ξ={xi}: {} vs {exact}", sol.m1c.re);
        assert!(sol.m1c.im.abs() < 1e-12);
    }
}

#[test]
fn iid_edge_agrees_with_general_scan() {
    for (gamma, xi) in [(0.2, 0.1), (0.2, 0.5)] {
        let ar = AspectRatios::new(gamma, xi).unwrap();
        let closed = bulk_edge_iid(ar).unwrap().lambda_plus;
        let scanned = bulk_edge_general(&SpectralAtoms::point(1.0), &mp_atoms(xi, 500), ar).unwrap();
        assert!((closed - scanned).abs() <= 1e-2, "γ={gamma} ξ={xi}: {closed} vs {scanned}");
    }
}

fn ratios() -> impl Strategy<Value = AspectRatios> {
    (0.05f64..2.0, 0.05f64..=1.0).prop_map(|(g, x)| AspectRatios::new(g, x).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn g2c_inverts_m2c(ar in ratios(), t in 0.0f64..1.0) {
        let edge = ar.lambda_plus_orthogonal();
        let x = edge + 1e-3 + t * (100.0 - edge - 1e-3);
        let back = g2c_closed(m2c_closed_real(x, ar).unwrap(), ar).unwrap();
        prop_assert!((back - x).abs() <= 1e-8 * x.max(1.0), "{back} vs {x}");
    }

    #[test]
    fn master_equation_matches_closed_form(ar in ratios(), t in 0.02f64..1.0) {
        let d_crit = (ar.gamma / ar.xi).powf(0.25);
        let d = d_crit * (1.0 + t * 10.0);
        let edge = ar.lambda_plus_orthogonal();
        let found = find_spike_master(d, |x| m2c_closed_real(x, ar), (edge * (1.0 + 1e-12), edge + 1.0)).unwrap();
        let theta = g2c_closed(-1.0 / (1.0 + d * d), ar).unwrap();
        match found {
            Detection::Above(x) => prop_assert!((x - theta).abs() <= 1e-8 * theta.max(1.0), "{x} vs {theta}"),
            Detection::Below => prop_assert!(false, "below at d = {d}, d_crit = {d_crit}"),
        }
        let pred = predict_orthogonal_family(d, ar).unwrap();
        prop_assert!((pred.theta - theta).abs() <= 1e-10 * theta.max(1.0));
    }

    #[test]
    fn unit_xi_is_classical(gamma in 0.05f64..2.0, t in 0.01f64..1.0) {
        let ar = AspectRatios::new(gamma, 1.0).unwrap();
        let d = gamma.powf(0.25) * (1.0 + 10.0 * t);
        let pred = predict_orthogonal_family(d, ar).unwrap();
        let ell = d * d;
        let theta = classic_spike_forward(ell, gamma).unwrap();
        prop_assert!((pred.theta - theta).abs() <= 1e-12 * theta);
        let c2 = classic_cos2_forward(ell, gamma).value().unwrap();
        prop_assert!((pred.cos2 - c2).abs() <= 1e-12);
    }

    #[test]
    fn cos2_grows_with_d(ar in ratios(), a in 0.0f64..5.0, b in 0.0f64..5.0) {
        let d_crit = (ar.gamma / ar.xi).powf(0.25);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-6);
        let (d1, d2) = (d_crit * (1.01 + lo), d_crit * (1.01 + hi));
        prop_assert!(predict_orthogonal_family(d1, ar).unwrap().cos2 < predict_orthogonal_family(d2, ar).unwrap().cos2);
        let i1 = predict_iid(d1.max(2.0 * d_crit), ar).unwrap();
        let i2 = predict_iid(d2.max(2.0 * d_crit) + 1e-3, ar).unwrap();
        prop_assert!(i1.cos2 <= i2.cos2);
    }

    #[test]
    fn xi_hat_is_increasing_and_below_xi(a in 0.05f64..1.0, b in 0.05f64..1.0) {
        prop_assume!((a - b).abs() > 1e-9);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(effective_xi_countsketch(lo) < effective_xi_countsketch(hi));
        prop_assert!(effective_xi_countsketch(hi) < hi);
    }
}
