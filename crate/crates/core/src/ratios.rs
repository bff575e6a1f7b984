//! Ratio statistics over cylinder tables: conditional-ratio decay scans,
//! cross-set comparison of matched cylinders, and quasi translation
//! invariance maxima.
//!
//! Every statistic only uses cells at or above the table's count floor;
//! excluded cells are counted and reported, never imputed.

use serde::{Deserialize, Serialize};

use crate::address::CylinderAddress;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::stats::{percentile_interval, BootstrapConfig};
use crate::table::CylinderMeasureTable;

/// Two cells below the floor in either table exclude a comparison.
fn floor_of(a: &CylinderMeasureTable, b: &CylinderMeasureTable) -> u64 {
    a.count_floor().max(b.count_floor())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioScanReport<T> {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    /// `max |(ω(IJL)/ω(IJ)) / (ω(I'JL)/ω(I'J)) - 1|` over passing combinations.
    pub max_abs_deviation: T,
    /// Delta-method standard error of the maximizing combination.
    pub argmax_std_error: T,
    pub pairs_scanned: u64,
    pub pairs_excluded: u64,
    /// Bootstrap percentile interval of the maximum (95%).
    pub interval: Option<(T, T)>,
}

fn harnack_max(table: &CylinderMeasureTable, n: usize, k: usize, m: usize) -> (f64, f64, u64, u64) {
    let floor = table.count_floor();
    let g_ij = n + k;
    let g_ijl = n + k + m;
    let (ni, nj, nl) = (1u64 << (2 * n), 1u64 << (2 * k), 1u64 << (2 * m));
    let (mut best, mut best_se, mut scanned, mut excluded) = (f64::NEG_INFINITY, 0.0, 0u64, 0u64);
    // I = I' always gives ratio 1; a scan with nothing else carries no information
    let mut informative = 0u64;
    for i in 0..ni {
        for ip in 0..ni {
            for j in 0..nj {
                let ij = (i << (2 * k)) | j;
                let ipj = (ip << (2 * k)) | j;
                let (c_ij, c_ipj) = (table.count_at(g_ij, ij), table.count_at(g_ij, ipj));
                for l in 0..nl {
                    let c_ijl = table.count_at(g_ijl, (ij << (2 * m)) | l);
                    let c_ipjl = table.count_at(g_ijl, (ipj << (2 * m)) | l);
                    if c_ijl < floor.max(1) || c_ipjl < floor.max(1) {
                        excluded += 1;
                        continue;
                    }
                    scanned += 1;
                    informative += u64::from(i != ip);
                    let r = (c_ijl as f64 / c_ij as f64) / (c_ipjl as f64 / c_ipj as f64);
                    let dev = (r - 1.0).abs();
                    if dev > best {
                        best = dev;
                        // var(log r) for two independent binomial proportions
                        let var = (1.0 / c_ijl as f64 - 1.0 / c_ij as f64)
                            + (1.0 / c_ipjl as f64 - 1.0 / c_ipj as f64);
                        best_se = r * var.max(0.0).sqrt();
                    }
                }
            }
        }
    }
    (best, best_se, if informative > 0 { scanned } else { 0 }, excluded)
}

/// Maximal deviation between the conditional laws below `IJ` and `I'J` for
/// `I, I'` of generation `n`, `J` of generation `k`, `L` of generation `m`.
pub fn harnack_ratio_scan<T: Real>(
    table: &CylinderMeasureTable,
    n: usize,
    k: usize,
    m: usize,
    bootstrap: Option<BootstrapConfig>,
) -> Result<RatioScanReport<T>> {
    if n + k + m > table.depth() {
        return Err(Error::InvalidParams(format!(
            "n + k + m = {} exceeds table depth {}",
            n + k + m,
            table.depth()
        )));
    }
    let (best, se, scanned, excluded) = harnack_max(table, n, k, m);
    if scanned == 0 {
        return Err(Error::InsufficientCounts(format!(
            "no (I, I', J, L) combination with I != I' and with counts >= {} at n={n}, k={k}, m={m}",
            table.count_floor()
        )));
    }
    let interval = bootstrap.map(|cfg| {
        let mut rng = cfg.generator();
        let mut samples: Vec<f64> = (0..cfg.resamples)
            .map(|_| harnack_max(&table.resample(&mut rng), n, k, m))
            .filter(|s| s.2 > 0)
            .map(|s| s.0)
            .collect();
        let (lo, hi) = percentile_interval(&mut samples, 0.95);
        (T::lit(lo), T::lit(hi))
    });
    Ok(RatioScanReport {
        n,
        k,
        m,
        max_abs_deviation: T::lit(best),
        argmax_std_error: T::lit(se),
        pairs_scanned: scanned,
        pairs_excluded: excluded,
        interval,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodimReport<T> {
    pub max_deviation: T,
    pub argmax: Option<CylinderAddress>,
    pub compared: u64,
    pub excluded: u64,
    pub interval: Option<(T, T)>,
}

/// Addresses (generation, index) of generation `1..=depth` passing the floor in both tables.
fn codim_support(a: &CylinderMeasureTable, b: &CylinderMeasureTable) -> (Vec<(usize, u64)>, u64) {
    let floor = floor_of(a, b).max(1);
    let mut keep = Vec::new();
    let mut excluded = 0;
    for g in 1..=a.depth() {
        for idx in 0..(1u64 << (2 * g)) {
            if a.count_at(g, idx) >= floor && b.count_at(g, idx) >= floor {
                keep.push((g, idx));
            } else {
                excluded += 1;
            }
        }
    }
    (keep, excluded)
}

fn codim_max(
    a: &CylinderMeasureTable,
    b: &CylinderMeasureTable,
    support: &[(usize, u64)],
) -> (f64, Option<(usize, u64)>) {
    let mut best = 0.0;
    let mut arg = None;
    for &(g, idx) in support {
        let (ca, pa) = (a.count_at(g, idx), a.count_at(g - 1, idx >> 2));
        let (cb, pb) = (b.count_at(g, idx), b.count_at(g - 1, idx >> 2));
        if ca == 0 || cb == 0 {
            continue;
        }
        let dev = ((ca as f64 / pa as f64) / (cb as f64 / pb as f64) - 1.0).abs();
        if dev > best || arg.is_none() {
            best = dev;
            arg = Some((g, idx));
        }
    }
    (best, arg)
}

/// `max |(ω(I)/ω(Î)) / (ω'(I)/ω'(Î)) - 1|` over addresses with the same word in both tables.
pub fn codim_compare<T: Real>(
    a: &CylinderMeasureTable,
    b: &CylinderMeasureTable,
    bootstrap: Option<BootstrapConfig>,
) -> Result<CodimReport<T>> {
    if a.depth() != b.depth() {
        return Err(Error::DepthMismatch(a.depth(), b.depth()));
    }
    let (support, excluded) = codim_support(a, b);
    let (best, arg) = codim_max(a, b, &support);
    let interval = bootstrap.map(|cfg| {
        let mut rng = cfg.generator();
        let mut samples: Vec<f64> = (0..cfg.resamples)
            .map(|_| codim_max(&a.resample(&mut rng), &b.resample(&mut rng), &support).0)
            .collect();
        let (lo, hi) = percentile_interval(&mut samples, 0.95);
        (T::lit(lo), T::lit(hi))
    });
    Ok(CodimReport {
        max_deviation: T::lit(best),
        argmax: arg.map(|(g, i)| CylinderAddress::from_index(i, g)),
        compared: support.len() as u64,
        excluded,
        interval,
    })
}

/// Quantile `q` of the codim deviation when both tables are drawn from their
/// pooled law with their own sizes: the pure Monte Carlo noise level.
pub fn codim_noise_quantile(
    a: &CylinderMeasureTable,
    b: &CylinderMeasureTable,
    q: f64,
    cfg: BootstrapConfig,
) -> Result<f64> {
    if a.depth() != b.depth() {
        return Err(Error::DepthMismatch(a.depth(), b.depth()));
    }
    let (support, _) = codim_support(a, b);
    let pooled_leaves: Vec<u64> = a
        .level(a.depth())
        .iter()
        .zip(b.level(b.depth()))
        .map(|(x, y)| x + y)
        .collect();
    let pooled = CylinderMeasureTable::from_leaf_counts(a.header().clone(), pooled_leaves)?;
    let mut rng = cfg.generator();
    let mut samples: Vec<f64> = (0..cfg.resamples)
        .map(|_| {
            let ra = pooled.resample_to(a.n_effective(), &mut rng);
            let rb = pooled.resample_to(b.n_effective(), &mut rng);
            codim_max(&ra, &rb, &support).0
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    Ok(crate::stats::quantile_sorted(&samples, q))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiInvarianceReport<T> {
    pub n: usize,
    pub k: usize,
    /// Empirical proxy for the constant `C~`: `max (ω(IJ)/ω(I)) / (ω(I'J)/ω(I'))`.
    pub max_ratio: T,
    pub pairs_scanned: u64,
    pub pairs_excluded: u64,
    pub interval: Option<(T, T)>,
}

fn quasi_max(table: &CylinderMeasureTable, n: usize, k: usize) -> (f64, u64, u64) {
    let floor = table.count_floor().max(1);
    let ni = 1u64 << (2 * n);
    let nj = 1u64 << (2 * k);
    let (mut best, mut scanned, mut excluded) = (f64::NEG_INFINITY, 0, 0);
    for i in 0..ni {
        for ip in 0..ni {
            let (ci, cip) = (table.count_at(n, i), table.count_at(n, ip));
            for j in 0..nj {
                let cij = table.count_at(n + k, (i << (2 * k)) | j);
                let cipj = table.count_at(n + k, (ip << (2 * k)) | j);
                if cij < floor || cipj < floor {
                    excluded += 1;
                    continue;
                }
                scanned += 1;
                let r = (cij as f64 / ci as f64) / (cipj as f64 / cip as f64);
                best = f64::max(best, r);
            }
        }
    }
    (best, scanned, excluded)
}

pub fn quasi_invariance_check<T: Real>(
    table: &CylinderMeasureTable,
    n: usize,
    k: usize,
    bootstrap: Option<BootstrapConfig>,
) -> Result<QuasiInvarianceReport<T>> {
    if n + k > table.depth() {
        return Err(Error::InvalidParams(format!(
            "n + k = {} exceeds table depth {}",
            n + k,
            table.depth()
        )));
    }
    let (best, scanned, excluded) = quasi_max(table, n, k);
    if scanned == 0 {
        return Err(Error::InsufficientCounts(format!(
            "no (I, I', J) combination with counts >= {} at n={n}, k={k}",
            table.count_floor()
        )));
    }
    let interval = bootstrap.map(|cfg| {
        let mut rng = cfg.generator();
        let mut samples: Vec<f64> = (0..cfg.resamples)
            .map(|_| quasi_max(&table.resample(&mut rng), n, k))
            .filter(|s| s.1 > 0)
            .map(|s| s.0)
            .collect();
        let (lo, hi) = percentile_interval(&mut samples, 0.95);
        (T::lit(lo), T::lit(hi))
    });
    Ok(QuasiInvarianceReport {
        n,
        k,
        max_ratio: T::lit(best),
        pairs_scanned: scanned,
        pairs_excluded: excluded,
        interval,
    })
}
