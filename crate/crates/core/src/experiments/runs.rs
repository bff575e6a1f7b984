use std::time::Instant;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::config::{ExperimentConfig, ExperimentKind};
use super::result::{ExperimentResult, Metric, Plot, Point, Series, SeriesStyle, Timing, Uncertainty};
use crate::address::CylinderAddress;
use crate::entropy::{cantor_ratio, delta_jk, dim_cantor, entropy_ratio_dimension, local_dimension_samples, EntropyReport};
use crate::error::{Error, Result};
use crate::oracle::{grid_harmonic_measure, richardson_check};
use crate::ratios::{codim_compare, codim_noise_quantile, harnack_ratio_scan, CodimReport, RatioScanReport};
use crate::rng::derive_seed;
use crate::sequence::ScaleSequence;
use crate::stats::{std_dev, BootstrapConfig, Z95};
use crate::table::CylinderMeasureTable;
use crate::wos::run_campaign;

const TAG_MAIN: u64 = 0x6D61_696E;
const TAG_CONTROL: u64 = 0x6374_726C;
const TAG_PERTURBED: u64 = 0x7065_7274;
const LOCAL_DIMENSION_SAMPLES: usize = 10_000;

/// Seed of the main campaign of an experiment with master seed `seed`.
pub fn main_campaign_seed(seed: u64) -> u64 {
    derive_seed(seed, TAG_MAIN)
}

/// Seed of the unperturbed control campaign of a continuity sweep.
pub fn control_campaign_seed(seed: u64) -> u64 {
    derive_seed(seed, TAG_CONTROL)
}

/// Seed of the `i`-th perturbed campaign of a continuity sweep.
pub fn perturbed_campaign_seed(seed: u64, i: usize) -> u64 {
    derive_seed(derive_seed(seed, TAG_PERTURBED), i as u64)
}

/// One experiment's result plus the tables it produced.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub result: ExperimentResult,
    pub tables: Vec<(String, CylinderMeasureTable)>,
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapAnalysis {
    pub dim_omega: f64,
    pub sigma: f64,
    pub dim_cantor: f64,
    /// `dim_cantor - dim_omega`.
    pub gap: f64,
    /// Gap in units of `sigma`; infinite when `sigma = 0` and the gap is positive.
    pub significance: f64,
    /// `dim_omega + 3 sigma < dim_cantor`.
    pub below_three_sigma: bool,
}

pub fn gap_analysis(
    table: &CylinderMeasureTable,
    seq: &ScaleSequence<f64>,
    boot: BootstrapConfig,
) -> Result<(GapAnalysis, EntropyReport<f64>)> {
    let report = entropy_ratio_dimension(table, seq, boot)?;
    let dk = dim_cantor(seq, table.depth());
    let gap = dk - report.estimate;
    let significance = if report.sigma > 0.0 {
        gap / report.sigma
    } else if gap > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok((
        GapAnalysis {
            dim_omega: report.estimate,
            sigma: report.sigma,
            dim_cantor: dk,
            gap,
            significance,
            below_three_sigma: report.estimate + 3.0 * report.sigma < dk,
        },
        report,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub slope_std_error: f64,
    /// `exp(slope)`.
    pub q_hat: f64,
    pub q_std_error: f64,
    pub r_squared: f64,
    /// Flat or increasing deviations.
    pub non_decaying: bool,
}

/// Least-squares fit of `log D_k = c + k log q`, with the slope error
/// propagated from per-point standard errors `se_k / D_k`.
pub fn fit_log_decay(ks: &[f64], deviations: &[f64], std_errors: &[f64]) -> Result<DecayFit> {
    if ks.len() < 2 || ks.len() != deviations.len() || ks.len() != std_errors.len() {
        return Err(Error::DegenerateFit("need at least two (k, D_k) pairs".into()));
    }
    let first = deviations[0];
    let constant = deviations
        .iter()
        .all(|&d| (d - first).abs() <= 1e-12 * first.abs().max(1e-300));
    if constant {
        return Ok(DecayFit {
            slope: 0.0,
            slope_std_error: 0.0,
            q_hat: 1.0,
            q_std_error: 0.0,
            r_squared: f64::NAN,
            non_decaying: true,
        });
    }
    if deviations.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::DegenerateFit(
            "log-linear fit needs positive deviations".into(),
        ));
    }
    let ys: Vec<f64> = deviations.iter().map(|d| d.ln()).collect();
    let fit = crate::stats::linear_fit(ks, &ys);
    let mx = crate::stats::mean(ks);
    let sxx: f64 = ks.iter().map(|x| (x - mx).powi(2)).sum();
    let var: f64 = ks
        .iter()
        .zip(deviations.iter().zip(std_errors))
        .map(|(x, (d, se))| ((x - mx) / sxx).powi(2) * (se / d).powi(2))
        .sum();
    let q = fit.slope.exp();
    Ok(DecayFit {
        slope: fit.slope,
        slope_std_error: var.sqrt(),
        q_hat: q,
        q_std_error: q * var.sqrt(),
        r_squared: fit.r_squared,
        non_decaying: fit.slope >= 0.0,
    })
}

pub fn harnack_analysis(
    table: &CylinderMeasureTable,
    n: usize,
    m: usize,
    k_max: usize,
    boot: Option<BootstrapConfig>,
) -> Result<(Vec<RatioScanReport<f64>>, DecayFit)> {
    let scans = (1..=k_max)
        .map(|k| harnack_ratio_scan::<f64>(table, n, k, m, boot))
        .collect::<Result<Vec<_>>>()?;
    let ks: Vec<f64> = scans.iter().map(|s| s.k as f64).collect();
    let ds: Vec<f64> = scans.iter().map(|s| s.max_abs_deviation).collect();
    let ses: Vec<f64> = scans.iter().map(|s| s.argmax_std_error).collect();
    let fit = fit_log_decay(&ks, &ds, &ses)?;
    Ok((scans, fit))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub base: CylinderAddress,
    pub k: usize,
    pub delta: f64,
    /// Bootstrap standard deviation; zero for exact tables.
    pub std_dev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaAnalysis {
    pub j: usize,
    pub rows: Vec<DeltaRow>,
    /// `Δ_j^k(∅)` strictly decreasing over `k = 1..k_max`.
    pub root_decreasing: bool,
}

/// `Δ_j^k(I)` for `I` the root and the four generation-1 cylinders,
/// `k = 1..=k_max`. Bases whose depth does not fit are skipped.
pub fn delta_analysis(
    table: &CylinderMeasureTable,
    j: usize,
    k_max: usize,
    boot: BootstrapConfig,
) -> Result<DeltaAnalysis> {
    let mut bases = vec![CylinderAddress::root()];
    bases.extend(CylinderAddress::all(1));
    let mut cells = Vec::new();
    for b in &bases {
        for k in 1..=k_max {
            if b.generation() + j + k <= table.depth() {
                cells.push((b.clone(), k));
            }
        }
    }
    let mut values = Vec::with_capacity(cells.len());
    for (b, k) in &cells {
        values.push(delta_jk::<f64>(table, b, j, *k)?.delta);
    }
    let mut reps: Vec<Vec<f64>> = vec![Vec::new(); cells.len()];
    if !table.is_exact() && boot.resamples >= 2 {
        let mut rng = boot.generator();
        for _ in 0..boot.resamples {
            let r = table.resample(&mut rng);
            for (i, (b, k)) in cells.iter().enumerate() {
                if let Ok(e) = delta_jk::<f64>(&r, b, j, *k) {
                    reps[i].push(e.delta);
                }
            }
        }
    }
    let rows: Vec<DeltaRow> = cells
        .into_iter()
        .zip(values)
        .zip(&reps)
        .map(|(((base, k), delta), rep)| DeltaRow {
            base,
            k,
            delta,
            std_dev: if rep.len() >= 2 { std_dev(rep) } else { 0.0 },
        })
        .collect();
    let root: Vec<f64> = rows.iter().filter(|r| r.base.is_root()).map(|r| r.delta).collect();
    Ok(DeltaAnalysis {
        j,
        root_decreasing: root.windows(2).all(|w| w[1] < w[0]),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityEntry {
    /// Zero for the unperturbed control.
    pub delta: f64,
    pub dim_omega: f64,
    pub sigma_bootstrap: f64,
    /// `|dim_omega - dim_omega(base)|`.
    pub difference: f64,
    /// `hypot` of the two bootstrap spreads.
    pub difference_sigma: f64,
    pub codim: CodimReport<f64>,
    /// 95% quantile of the codim deviation under pure sampling noise.
    pub codim_noise_q95: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityAnalysis {
    pub base_dim_omega: f64,
    pub base_sigma_bootstrap: f64,
    /// Control first (if any), then perturbations in the given order.
    pub entries: Vec<ContinuityEntry>,
    /// Control difference within 3 combined sigma of zero; true without a control.
    pub control_consistent: bool,
    /// No larger-delta difference falls significantly (3 sigma) below a smaller-delta one.
    pub monotone_within_ci: bool,
    /// Every `(D - 3 sigma) / delta` stays below twice the
    /// `(D + 3 sigma) / delta` of the largest delta.
    pub lipschitz_bounded: bool,
    /// `max (D + 3 sigma) / delta` over the perturbations.
    pub lipschitz_upper: f64,
}

/// The finite-depth bias of `d_n` is common to sequences this close, so the
/// difference carries only the bootstrap spreads.
pub fn continuity_analysis(
    base: (&CylinderMeasureTable, &ScaleSequence<f64>),
    control: Option<&CylinderMeasureTable>,
    perturbed: &[(f64, &CylinderMeasureTable, &ScaleSequence<f64>)],
    boot: BootstrapConfig,
) -> Result<ContinuityAnalysis> {
    let (bt, bseq) = base;
    let b = entropy_ratio_dimension(bt, bseq, boot)?;
    let mut entries = Vec::new();
    let mut compare = |delta: f64, t: &CylinderMeasureTable, seq: &ScaleSequence<f64>| -> Result<()> {
        let r = entropy_ratio_dimension(t, seq, boot)?;
        entries.push(ContinuityEntry {
            delta,
            dim_omega: r.estimate,
            sigma_bootstrap: r.sigma_bootstrap,
            difference: (r.estimate - b.estimate).abs(),
            difference_sigma: r.sigma_bootstrap.hypot(b.sigma_bootstrap),
            codim: codim_compare(bt, t, Some(boot))?,
            codim_noise_q95: codim_noise_quantile(bt, t, 0.95, boot)?,
        });
        Ok(())
    };
    if let Some(c) = control {
        compare(0.0, c, bseq)?;
    }
    for &(d, t, s) in perturbed {
        compare(d, t, s)?;
    }
    let control_consistent = entries
        .iter()
        .filter(|e| e.delta == 0.0)
        .all(|e| e.difference <= 3.0 * e.difference_sigma);
    let mut sweep: Vec<&ContinuityEntry> = entries.iter().filter(|e| e.delta > 0.0).collect();
    sweep.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    let monotone_within_ci = sweep.windows(2).all(|w| {
        w[1].difference - w[0].difference <= 3.0 * w[0].difference_sigma.hypot(w[1].difference_sigma)
    });
    let (lipschitz_bounded, lipschitz_upper) = match sweep.first() {
        None => (true, 0.0),
        Some(top) => {
            let bound = 2.0 * (top.difference + 3.0 * top.difference_sigma) / top.delta;
            let ok = sweep
                .iter()
                .all(|e| (e.difference - 3.0 * e.difference_sigma) / e.delta <= bound);
            let upper = sweep
                .iter()
                .map(|e| (e.difference + 3.0 * e.difference_sigma) / e.delta)
                .fold(0.0, f64::max);
            (ok, upper)
        }
    };
    Ok(ContinuityAnalysis {
        base_dim_omega: b.estimate,
        base_sigma_bootstrap: b.sigma_bootstrap,
        entries,
        control_consistent,
        monotone_within_ci,
        lipschitz_bounded,
        lipschitz_upper,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub max_abs_difference: f64,
    /// Standard error of the difference at the maximizing cell.
    pub max_difference_std_error: f64,
    pub max_z: f64,
    /// Bonferroni-corrected two-sided 95% critical value over all cells.
    pub critical_z: f64,
    pub consistent: bool,
}

/// Cellwise comparison of two full-depth tables with a joint 95% verdict.
pub fn oracle_verdict(a: &CylinderMeasureTable, b: &CylinderMeasureTable) -> Result<OracleVerdict> {
    if a.depth() != b.depth() {
        return Err(Error::DepthMismatch(a.depth(), b.depth()));
    }
    let (na, nb) = (a.n_effective() as f64, b.n_effective() as f64);
    let cells = a.level(a.depth()).len();
    let normal = Normal::standard();
    let critical_z = normal.inverse_cdf(1.0 - 0.05 / (2.0 * cells as f64));
    let (mut diff, mut diff_se, mut max_z) = (0.0f64, 0.0, 0.0f64);
    for (&x, &y) in a.level(a.depth()).iter().zip(b.level(b.depth())) {
        let (p, q) = (x as f64 / na, y as f64 / nb);
        let se = (p * (1.0 - p) / na + q * (1.0 - q) / nb).sqrt();
        let d = (p - q).abs();
        if d >= diff {
            diff = d;
            diff_se = se;
        }
        if se > 0.0 {
            max_z = max_z.max(d / se);
        } else if d > 0.0 {
            max_z = f64::INFINITY;
        }
    }
    Ok(OracleVerdict {
        max_abs_difference: diff,
        max_difference_std_error: diff_se,
        max_z,
        critical_z,
        consistent: max_z <= critical_z,
    })
}


struct Clock {
    start: Instant,
    walkers: u64,
}

impl Clock {
    fn start() -> Self {
        Self {
            start: Instant::now(),
            walkers: 0,
        }
    }

    fn finish(&self) -> Timing {
        let s = self.start.elapsed().as_secs_f64();
        Timing {
            wall_seconds: s,
            walkers: self.walkers,
            walkers_per_second: if s > 0.0 { self.walkers as f64 / s } else { 0.0 },
        }
    }
}

fn sample_main(cfg: &ExperimentConfig, seq: &ScaleSequence<f64>, clock: &mut Clock) -> Result<CylinderMeasureTable> {
    if let Some(path) = &cfg.campaign.table {
        let t = CylinderMeasureTable::load(path)?;
        if t.depth() != cfg.wos.depth {
            return Err(Error::DepthMismatch(t.depth(), cfg.wos.depth));
        }
        let expected = seq.prefix_f64(t.depth());
        if t.header().sequence_prefix != expected {
            return Err(Error::Config(format!(
                "table {} was sampled for a different scale sequence",
                path.display()
            )));
        }
        return Ok(t);
    }
    clock.walkers += cfg.campaign.walkers;
    run_campaign(
        seq,
        cfg.wos.params(seq),
        cfg.campaign.walkers,
        main_campaign_seed(cfg.seed),
        cfg.worker_count(),
    )
}

fn dn_plot(report: &EntropyReport<f64>, seq: &ScaleSequence<f64>, name: &str) -> Plot {
    let last = report.generations.len();
    Plot {
        name: name.into(),
        title: "entropy-ratio dimension by generation".into(),
        x_label: "generation n".into(),
        y_label: "d_n".into(),
        log_y: false,
        series: vec![
            Series {
                label: "harmonic measure".into(),
                style: SeriesStyle::Markers,
                points: report
                    .generations
                    .iter()
                    .map(|g| Point {
                        x: g.n as f64,
                        y: g.ratio,
                        err: if g.n == last { report.sigma } else { 0.0 },
                    })
                    .collect(),
            },
            Series {
                label: "uniform measure".into(),
                style: SeriesStyle::Line,
                points: (1..=last)
                    .map(|n| Point {
                        x: n as f64,
                        y: cantor_ratio(seq, n),
                        err: 0.0,
                    })
                    .collect(),
            },
        ],
    }
}

fn record_entropy(r: &mut ExperimentResult, report: &EntropyReport<f64>) {
    r.metric(
        "dim_omega",
        Metric::new(report.estimate, report.sigma, Uncertainty::Combined),
    );
    r.metric(
        "dim_omega_bootstrap",
        Metric::new(report.estimate, report.sigma_bootstrap, Uncertainty::BootstrapStd),
    );
    for g in &report.generations {
        r.metric(
            format!("miller_madow_n{}", g.n),
            Metric::exact(g.miller_madow),
        );
    }
}

pub fn run_sample(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate(ExperimentKind::Sample)?;
    let seq = cfg.sequence.build()?;
    let mut clock = Clock::start();
    let table = sample_main(cfg, &seq, &mut clock)?;
    let mut r = ExperimentResult::new(ExperimentKind::Sample, cfg);
    let n = table.n_effective();
    r.metric("n_effective", Metric::exact(n as f64));
    let disc = table.header().discarded as f64 / table.header().n_walkers.max(1) as f64;
    r.metric(
        "discarded_fraction",
        Metric::new(disc, (disc * (1.0 - disc) / table.header().n_walkers.max(1) as f64).sqrt(), Uncertainty::StdError),
    );
    let mut pts = Vec::new();
    for a in CylinderAddress::all(1) {
        let p = table.count(&a) as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        r.metric(format!("p_{a}"), Metric::new(p, se, Uncertainty::StdError));
        pts.push(Point { x: a.index() as f64 + 1.0, y: p, err: Z95 * se });
    }
    if let Some(s) = table.header().metadata.get("mean_steps") {
        r.notes.push(format!("mean walk-on-spheres steps per walker: {s:.3}"));
    }
    r.plots.push(Plot {
        name: "sample_generation1".into(),
        title: "generation-1 cylinder probabilities".into(),
        x_label: "symbol".into(),
        y_label: "probability".into(),
        log_y: false,
        series: vec![Series {
            label: "walk-on-spheres".into(),
            style: SeriesStyle::Markers,
            points: pts,
        }],
    });
    r.timing = clock.finish();
    Ok(RunOutput {
        result: r,
        tables: vec![("table".into(), table)],
    })
}

pub fn run_dims(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate(ExperimentKind::Dims)?;
    let seq = cfg.sequence.build()?;
    let mut clock = Clock::start();
    let table = sample_main(cfg, &seq, &mut clock)?;
    let report = entropy_ratio_dimension(&table, &seq, cfg.bootstrap)?;
    let local = local_dimension_samples(&table, &seq, LOCAL_DIMENSION_SAMPLES, cfg.bootstrap.seed)?;
    let mut r = ExperimentResult::new(ExperimentKind::Dims, cfg);
    record_entropy(&mut r, &report);
    r.metric("dim_cantor", Metric::exact(dim_cantor(&seq, table.depth())));
    r.metric(
        "local_dimension_mean",
        Metric::new(
            local.mean,
            local.std_dev / (local.samples.len() as f64).sqrt(),
            Uncertainty::StdError,
        ),
    );
    r.metric(
        "local_dimension_spread",
        Metric::new(local.std_dev, local.std_dev / (2.0 * (local.samples.len() as f64 - 1.0)).sqrt(), Uncertainty::StdError),
    );
    r.plots.push(dn_plot(&report, &seq, "dims_dn"));
    r.timing = clock.finish();
    Ok(RunOutput {
        result: r,
        tables: vec![("table".into(), table)],
    })
}

pub fn run_gap_test(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate(ExperimentKind::Gap)?;
    let seq = cfg.sequence.build()?;
    let mut clock = Clock::start();
    let table = if cfg.gap.synthetic_uniform {
        CylinderMeasureTable::synthetic_uniform(cfg.wos.depth)?
    } else {
        sample_main(cfg, &seq, &mut clock)?
    };
    let (gap, report) = gap_analysis(&table, &seq, cfg.bootstrap)?;
    let mut r = ExperimentResult::new(ExperimentKind::Gap, cfg);
    record_entropy(&mut r, &report);
    r.metric("dim_cantor", Metric::exact(gap.dim_cantor));
    r.metric("gap", Metric::new(gap.gap, gap.sigma, Uncertainty::Combined));
    r.metric(
        "gap_significance_sigmas",
        Metric::new(gap.significance, 1.0, Uncertainty::StdError),
    );
    r.check("dim_omega_plus_3sigma_below_dim_cantor", gap.below_three_sigma);
    if dim_cantor(&seq, table.depth()) <= 1.0 + 1e-12 {
        r.check("dim_omega_plus_3sigma_below_one", gap.dim_omega + 3.0 * gap.sigma < 1.0);
    }
    if cfg.gap.synthetic_uniform {
        r.notes.push("table replaced by the exact uniform measure".into());
    }
    r.plots.push(dn_plot(&report, &seq, "gap_dn"));
    r.timing = clock.finish();
    Ok(RunOutput {
        result: r,
        tables: vec![("table".into(), table)],
    })
}

fn harnack_plot(scans: &[RatioScanReport<f64>], fit: &DecayFit) -> Plot {
    let ks: Vec<f64> = scans.iter().map(|s| s.k as f64).collect();
    let c = if fit.r_squared.is_nan() {
        scans[0].max_abs_deviation.ln()
    } else {
        let ys: Vec<f64> = scans.iter().map(|s| s.max_abs_deviation.ln()).collect();
        crate::stats::mean(&ys) - fit.slope * crate::stats::mean(&ks)
    };
    Plot {
        name: "harnack_decay".into(),
        title: "maximal conditional-ratio deviation".into(),
        x_label: "k".into(),
        y_label: "D(k)".into(),
        log_y: true,
        series: vec![
            Series {
                label: "measured".into(),
                style: SeriesStyle::Markers,
                points: scans
                    .iter()
                    .map(|s| Point {
                        x: s.k as f64,
                        y: s.max_abs_deviation,
                        err: Z95 * s.argmax_std_error,
                    })
                    .collect(),
            },
            Series {
                label: "log-linear fit".into(),
                style: SeriesStyle::Line,
                points: ks
                    .iter()
                    .map(|&k| Point {
                        x: k,
                        y: (c + fit.slope * k).exp(),
                        err: 0.0,
                    })
                    .collect(),
            },
        ],
    }
}

pub fn run_harnack_scan(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate(ExperimentKind::Harnack)?;
    let seq = cfg.sequence.build()?;
    let mut clock = Clock::start();
    let table = sample_main(cfg, &seq, &mut clock)?;
    let h = cfg.harnack;
    let (scans, fit) = harnack_analysis(&table, h.n, h.m, h.k_max, Some(cfg.bootstrap))?;
    let mut r = ExperimentResult::new(ExperimentKind::Harnack, cfg);
    for s in &scans {
        r.metric(
            format!("deviation_k{}", s.k),
            Metric::new(s.max_abs_deviation, s.argmax_std_error, Uncertainty::StdError),
        );
        if let Some((lo, hi)) = s.interval {
            r.notes.push(format!("k={}: bootstrap 95% interval [{lo:.6}, {hi:.6}], {} combinations, {} below floor", s.k, s.pairs_scanned, s.pairs_excluded));
        }
    }
    r.metric("slope", Metric::new(fit.slope, fit.slope_std_error, Uncertainty::StdError));
    r.metric("q_hat", Metric::new(fit.q_hat, fit.q_std_error, Uncertainty::StdError));
    r.metric("r_squared", Metric::exact(fit.r_squared));
    r.check("q_hat_below_one", fit.q_hat < 1.0);
    r.check("r_squared_at_least_0.8", fit.r_squared >= 0.8);
    r.check("non_decaying", fit.non_decaying);
    r.plots.push(harnack_plot(&scans, &fit));
    r.timing = clock.finish();
    Ok(RunOutput {
        result: r,
        tables: vec![("table".into(), table)],
    })
}

pub fn run_delta_decay(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate(ExperimentKind::Delta)?;
    let seq = cfg.sequence.build()?;
    let mut clock = Clock::start();
    let table = sample_main(cfg, &seq, &mut clock)?;
    let d = delta_analysis(&table, cfg.delta.j, cfg.delta.k_max, cfg.bootstrap)?;
    let mut r = ExperimentResult::new(ExperimentKind::Delta, cfg);
    let mut series: Vec<Series> = Vec::new();
    for row in &d.rows {
        let label = if row.base.is_root() { "root".to_string() } else { row.base.to_string() };
        r.metric(
            format!("delta_{}_j{}_k{}", label, d.j, row.k),
            Metric::new(row.delta, row.std_dev, Uncertainty::BootstrapStd),
        );
        let pt = Point { x: row.k as f64, y: row.delta, err: Z95 * row.std_dev };
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push(pt),
            None => series.push(Series { label, style: SeriesStyle::Markers, points: vec![pt] }),
        }
    }
    r.check("root_decreasing", d.root_decreasing);
    r.plots.push(Plot {
        name: "delta_decay".into(),
        title: format!("entropy oscillation, j = {}", d.j),
        x_label: "k".into(),
        y_label: "oscillation".into(),
        log_y: true,
        series,
    });
    r.timing = clock.finish();
    Ok(RunOutput {
        result: r,
        tables: vec![("table".into(), table)],
    })
}

pub fn run_continuity_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate(ExperimentKind::Continuity)?;
    let base_seq = cfg.sequence.build()?;
    let mut clock = Clock::start();
    let workers = cfg.worker_count();
    let walkers = cfg.campaign.walkers;
    let base = sample_main(cfg, &base_seq, &mut clock)?;
    let control = if cfg.continuity.control {
        clock.walkers += walkers;
        Some(run_campaign(
            &base_seq,
            cfg.wos.params(&base_seq),
            walkers,
            control_campaign_seed(cfg.seed),
            workers,
        )?)
    } else {
        None
    };
    let mut perturbed = Vec::new();
    for (i, &d) in cfg.continuity.deltas.iter().enumerate() {
        let seq = base_seq.perturbed(d, cfg.continuity.pattern)?;
        clock.walkers += walkers;
        let t = run_campaign(&seq, cfg.wos.params(&seq), walkers, perturbed_campaign_seed(cfg.seed, i), workers)?;
        perturbed.push((d, t, seq));
    }
    let refs: Vec<(f64, &CylinderMeasureTable, &ScaleSequence<f64>)> =
        perturbed.iter().map(|(d, t, s)| (*d, t, s)).collect();
    let a = continuity_analysis((&base, &base_seq), control.as_ref(), &refs, cfg.bootstrap)?;

    let mut r = ExperimentResult::new(ExperimentKind::Continuity, cfg);
    r.metric(
        "dim_omega_base",
        Metric::new(a.base_dim_omega, a.base_sigma_bootstrap, Uncertainty::BootstrapStd),
    );
    for e in &a.entries {
        let tag = if e.delta == 0.0 { "control".to_string() } else { format!("delta_{}", e.delta) };
        r.metric(format!("dim_omega_{tag}"), Metric::new(e.dim_omega, e.sigma_bootstrap, Uncertainty::BootstrapStd));
        r.metric(format!("difference_{tag}"), Metric::new(e.difference, e.difference_sigma, Uncertainty::BootstrapStd));
        if e.delta > 0.0 {
            r.metric(
                format!("difference_over_delta_{tag}"),
                Metric::new(e.difference / e.delta, e.difference_sigma / e.delta, Uncertainty::BootstrapStd),
            );
        }
        let half = e.codim.interval.map_or(f64::NAN, |(lo, hi)| (hi - lo) / (2.0 * Z95));
        r.metric(format!("codim_max_deviation_{tag}"), Metric::new(e.codim.max_deviation, half, Uncertainty::BootstrapStd));
        r.metric(format!("codim_noise_q95_{tag}"), Metric::new(e.codim_noise_q95, 0.0, Uncertainty::Exact));
    }
    r.metric("lipschitz_upper", Metric::new(a.lipschitz_upper, 0.0, Uncertainty::Exact));
    r.check("control_consistent_with_zero", a.control_consistent);
    r.check("monotone_within_ci", a.monotone_within_ci);
    r.check("lipschitz_bounded", a.lipschitz_bounded);
    r.notes.push(format!("perturbation pattern: {:?}", cfg.continuity.pattern));
    r.plots.push(Plot {
        name: "continuity_sweep".into(),
        title: "dimension difference against perturbation size".into(),
        x_label: "delta".into(),
        y_label: "|dim difference|".into(),
        log_y: false,
        series: vec![Series {
            label: "entropy-ratio estimate".into(),
            style: SeriesStyle::Markers,
            points: a
                .entries
                .iter()
                .map(|e| Point { x: e.delta, y: e.difference, err: Z95 * e.difference_sigma })
                .collect(),
        }],
    });
    r.timing = clock.finish();
    let mut tables = vec![("base".to_string(), base)];
    if let Some(c) = control {
        tables.push(("control".into(), c));
    }
    for (d, t, _) in perturbed {
        tables.push((format!("delta_{d}"), t));
    }
    Ok(RunOutput { result: r, tables })
}

pub fn run_oracle_compare(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate(ExperimentKind::OracleCompare)?;
    let seq = cfg.sequence.build()?;
    let mut clock = Clock::start();
    let wos = sample_main(cfg, &seq, &mut clock)?;
    let params = cfg.oracle.params(&seq, cfg.wos.depth);
    clock.walkers += params.walkers;
    let mut r = ExperimentResult::new(ExperimentKind::OracleCompare, cfg);
    let oracle = if cfg.oracle.richardson {
        clock.walkers += params.walkers;
        let rc = richardson_check(&seq, &params, cfg.seed, cfg.worker_count())?;
        r.metric(
            "richardson_max_abs_difference",
            Metric::new(rc.max_abs_difference, rc.combined_std_error, Uncertainty::StdError),
        );
        rc.coarse
    } else {
        grid_harmonic_measure(&seq, &params, cfg.seed, cfg.worker_count())?
    };
    let v = oracle_verdict(&wos, &oracle)?;
    r.metric(
        "max_abs_difference",
        Metric::new(v.max_abs_difference, v.max_difference_std_error, Uncertainty::StdError),
    );
    r.metric("max_z", Metric::new(v.max_z, 1.0, Uncertainty::StdError));
    r.metric("critical_z", Metric::exact(v.critical_z));
    r.check("joint_ci_consistent", v.consistent);
    r.check("max_abs_difference_at_most_0.01", v.max_abs_difference <= 0.01);
    let depth = cfg.wos.depth;
    let pts = |t: &CylinderMeasureTable| -> Vec<Point> {
        let n = t.n_effective() as f64;
        t.level(depth)
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let p = c as f64 / n;
                Point { x: i as f64, y: p, err: Z95 * (p * (1.0 - p) / n).sqrt() }
            })
            .collect()
    };
    r.plots.push(Plot {
        name: "oracle_compare".into(),
        title: format!("generation-{depth} probabilities"),
        x_label: "cylinder index".into(),
        y_label: "probability".into(),
        log_y: false,
        series: vec![
            Series { label: "walk-on-spheres".into(), style: SeriesStyle::Markers, points: pts(&wos) },
            Series { label: "lattice oracle".into(), style: SeriesStyle::Markers, points: pts(&oracle) },
        ],
    });
    r.timing = clock.finish();
    Ok(RunOutput {
        result: r,
        tables: vec![("wos".into(), wos), ("oracle".into(), oracle)],
    })
}

pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<RunOutput> {
    match kind {
        ExperimentKind::Sample => run_sample(cfg),
        ExperimentKind::Dims => run_dims(cfg),
        ExperimentKind::Continuity => run_continuity_sweep(cfg),
        ExperimentKind::Gap => run_gap_test(cfg),
        ExperimentKind::Harnack => run_harnack_scan(cfg),
        ExperimentKind::Delta => run_delta_decay(cfg),
        ExperimentKind::OracleCompare => run_oracle_compare(cfg),
    }
}
