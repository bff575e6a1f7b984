use cantor_harmonic::experiments::runs::oracle_verdict;
use cantor_harmonic::oracle::{grid_harmonic_measure, richardson_check, GridOracleParams};
use cantor_harmonic::wos::reentry_offset_cdf;
use cantor_harmonic::*;
use rand::SeedableRng;

fn quarter() -> ScaleSequence<f64> {
    ScaleSequence::constant(0.25).unwrap()
}

/// Composite Simpson integral of the exterior hitting density from -pi to x.
fn quadrature_cdf(rho: f64, x: f64) -> f64 {
    let density = |phi: f64| {
        (rho * rho - 1.0) / (2.0 * std::f64::consts::PI * (rho * rho - 2.0 * rho * phi.cos() + 1.0))
    };
    let a = -std::f64::consts::PI;
    let n = 2000;
    let h = (x - a) / n as f64;
    let mut s = density(a) + density(x);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * density(a + i as f64 * h);
    }
    s * h / 3.0
}

fn ks_statistic(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn analytic_reentry_cdf_matches_quadrature() {
    for rho in [1.1, 2.0, 8.0] {
        for i in 0..=40 {
            let x = -std::f64::consts::PI + i as f64 * std::f64::consts::TAU / 40.0;
            let x = x.clamp(-3.1415, 3.1415);
            assert!((reentry_offset_cdf(rho, x) - quadrature_cdf(rho, x)).abs() < 1e-9);
        }
    }
}

#[test]
fn reentry_samples_follow_quadrature_cdf() {
    let r = 8.0f64;
    let c = [0.5f64, 0.5];
    for rho in [2.0, 8.0] {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let p = [c[0] + rho * r, c[1]];
        let offsets: Vec<f64> = (0..20_000)
            .map(|_| {
                let q = exterior_reentry(p, r, &mut rng).unwrap();
                assert!(((q[0] - c[0]).hypot(q[1] - c[1]) - r).abs() < 1e-12);
                (q[1] - c[1]).atan2(q[0] - c[0])
            })
            .collect();
        let d = ks_statistic(offsets, |x| quadrature_cdf(rho, x));
        // 1.63 / sqrt(n) is the 1% critical value
        assert!(d < 1.63 / (20_000f64).sqrt(), "rho {rho}: KS {d}");
    }
}

#[test]
fn wos_agrees_with_lattice_oracle_at_depth_one_and_two() {
    let seq = quarter();
    for depth in [1, 2] {
        let w = run_campaign(&seq, WosParams::defaults(&seq, depth), 100_000, 17, 1).unwrap();
        let o = grid_harmonic_measure(
            &seq,
            &GridOracleParams::defaults(&seq, depth, 100_000),
            17,
            1,
        )
        .unwrap();
        let v = oracle_verdict(&w, &o).unwrap();
        assert!(v.consistent, "depth {depth}: {v:?}");
        assert!(v.max_abs_difference < 0.01);
    }
}

#[test]
fn wos_agrees_with_oracle_on_asymmetric_sequence() {
    let seq = ScaleSequence::periodic(vec![0.2, 0.35]).unwrap();
    let w = run_campaign(&seq, WosParams::defaults(&seq, 2), 100_000, 5, 1).unwrap();
    // at h = l/8 the lattice bias (~0.002 per cell) is resolvable at this size
    let mut p = GridOracleParams::defaults(&seq, 2, 100_000);
    p.spacing = seq.sidelength(2) / 16.0;
    let o = grid_harmonic_measure(&seq, &p, 5, 1).unwrap();
    let v = oracle_verdict(&w, &o).unwrap();
    assert!(v.consistent, "{v:?}");
    assert!(v.max_abs_difference < 0.01);
}

#[test]
fn start_radius_does_not_change_the_law() {
    let seq = quarter();
    let near = WosParams {
        start_radius: 1.0,
        reentry_radius: 1.0,
        outer_radius: 2.0,
        ..WosParams::defaults(&seq, 2)
    };
    let a = run_campaign(&seq, near, 100_000, 8, 1).unwrap();
    let b = run_campaign(&seq, WosParams::defaults(&seq, 2), 100_000, 9, 1).unwrap();
    let v = oracle_verdict(&a, &b).unwrap();
    assert!(v.consistent, "{v:?}");
}

#[test]
fn depth_one_symmetry_of_wos() {
    let seq = quarter();
    let t = run_campaign(&seq, WosParams::defaults(&seq, 1), 200_000, 3, 1).unwrap();
    let n = t.n_effective() as f64;
    let se = (0.25f64 * 0.75 / n).sqrt();
    for &c in t.level(1) {
        assert!((c as f64 / n - 0.25).abs() < 5.0 * se);
    }
    // relabelling by the rotation 1->2->3->4->1 maps the law to itself
    let t2 = run_campaign(&seq, WosParams::defaults(&seq, 2), 200_000, 4, 1).unwrap();
    let n2 = t2.n_effective() as f64;
    for a in CylinderAddress::all(2) {
        let b = a.relabel([2, 3, 4, 1]);
        let (p, q) = (t2.count(&a) as f64 / n2, t2.count(&b) as f64 / n2);
        let se = (p * (1.0 - p) / n2 + q * (1.0 - q) / n2).sqrt();
        assert!((p - q).abs() < 5.0 * se.max(1e-6), "{a} vs {b}");
    }
}

#[test]
fn richardson_self_consistency_at_depth_one() {
    let seq = quarter();
    let p = GridOracleParams::defaults(&seq, 1, 40_000);
    let r = richardson_check(&seq, &p, 11, 1).unwrap();
    assert!(r.max_abs_difference < 2.0 * r.combined_std_error + 1e-12, "{} vs {}", r.max_abs_difference, r.combined_std_error);
    assert_eq!(
        r.coarse.header().metadata["richardson_max_abs_difference"],
        r.max_abs_difference
    );
    assert!(r.coarse.header().oracle && r.fine.header().oracle);
}

#[test]
fn oracle_tables_satisfy_partition_identities() {
    let seq = quarter();
    let t = grid_harmonic_measure(&seq, &GridOracleParams::defaults(&seq, 2, 5_000), 2, 1).unwrap();
    for g in 0..2 {
        for (i, &c) in t.level(g).iter().enumerate() {
            let kids: u64 = t.level(g + 1)[4 * i..4 * i + 4].iter().sum();
            assert_eq!(c, kids);
        }
    }
    assert_eq!(t.level(0)[0], t.n_effective());
    assert_eq!(t.header().source, TableSource::LatticeOracle);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("o.csv");
    t.save(&path).unwrap();
    let back = CylinderMeasureTable::load(&path).unwrap();
    assert_eq!(back, t);
    assert!(back.header().oracle);
}
