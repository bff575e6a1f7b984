//! Entropy functionals of cylinder measures and the entropy-ratio dimension
//! estimator.
//!
//! All logarithms are natural. Plug-in quantities use `0 log 0 = 0`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::address::CylinderAddress;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::sequence::ScaleSequence;
use crate::stats::{mean, std_dev, BootstrapConfig};
use crate::table::CylinderMeasureTable;

/// Number of trailing generations used as the finite-`n` proxy for a liminf.
pub const TAIL_WINDOW: usize = 3;

/// `-sum p log p` over the cells `[start, start + len)` of `generation`, with
/// `p = count / total`.
fn block_entropy<T: Real>(counts: &[u64], total: u64) -> T {
    let t = T::from_count(total);
    counts
        .iter()
        .filter(|&&c| c > 0)
        .fold(T::zero(), |acc, &c| {
            let p = T::from_count(c) / t;
            acc - p * p.ln()
        })
}

fn check_floor(table: &CylinderMeasureTable, addr: &CylinderAddress) -> Result<u64> {
    let c = table.count(addr);
    if c == 0 || c < table.count_floor() {
        return Err(Error::InsufficientCounts(format!(
            "cylinder {addr:?} has count {c} below floor {}",
            table.count_floor()
        )));
    }
    Ok(c)
}

/// `h_k(L) = -(1/k) sum_{K in gen k} (ω(LK)/ω(L)) log(ω(LK)/ω(L))`; `h_0 = 0`.
pub fn entropy_hk<T: Real>(table: &CylinderMeasureTable, base: &CylinderAddress, k: usize) -> Result<T> {
    let g = base.generation();
    if g + k > table.depth() {
        return Err(Error::InvalidParams(format!(
            "gen(L) + k = {} exceeds table depth {}",
            g + k,
            table.depth()
        )));
    }
    let total = check_floor(table, base)?;
    if k == 0 {
        return Ok(T::zero());
    }
    let width = 1usize << (2 * k);
    let start = base.index() as usize * width;
    let level = table.level(g + k);
    Ok(block_entropy::<T>(&level[start..start + width], total) / T::from_count(k as u64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationEntry<T> {
    pub base: CylinderAddress,
    /// `Δ_j^k(I) = max_J h_k(IJ) - min_J h_k(IJ)`.
    pub delta: T,
    pub cells_used: usize,
    pub cells_excluded: usize,
}

/// `Δ_j^k(I)` over the generation-`j` descendants `J` whose `IJ` pass the count floor.
pub fn delta_jk<T: Real>(
    table: &CylinderMeasureTable,
    base: &CylinderAddress,
    j: usize,
    k: usize,
) -> Result<OscillationEntry<T>> {
    if base.generation() + j + k > table.depth() {
        return Err(Error::InvalidParams(format!(
            "gen(I) + j + k = {} exceeds table depth {}",
            base.generation() + j + k,
            table.depth()
        )));
    }
    if j == 0 {
        check_floor(table, base)?;
        return Ok(OscillationEntry {
            base: base.clone(),
            delta: T::zero(),
            cells_used: 1,
            cells_excluded: 0,
        });
    }
    let mut values = Vec::new();
    let mut excluded = 0;
    for tail in CylinderAddress::all(j) {
        match entropy_hk::<T>(table, &base.concat(&tail), k) {
            Ok(h) => values.push(h),
            Err(Error::InsufficientCounts(_)) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    if values.len() < 2 {
        return Err(Error::InsufficientCounts(format!(
            "only {} descendants of {base:?} at j={j} pass the floor",
            values.len()
        )));
    }
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    let min = values.iter().copied().fold(T::infinity(), T::min);
    Ok(OscillationEntry {
        base: base.clone(),
        delta: max - min,
        cells_used: values.len(),
        cells_excluded: excluded,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport<T> {
    pub j: usize,
    pub k: usize,
    pub entries: Vec<OscillationEntry<T>>,
    pub max: T,
}

/// `Δ_j^k` for every base in `bases`; bases failing the floor are skipped.
pub fn oscillation_report<T: Real>(
    table: &CylinderMeasureTable,
    bases: &[CylinderAddress],
    j: usize,
    k: usize,
) -> Result<OscillationReport<T>> {
    let mut entries = Vec::new();
    for b in bases {
        match delta_jk::<T>(table, b, j, k) {
            Ok(e) => entries.push(e),
            Err(Error::InsufficientCounts(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if entries.is_empty() {
        return Err(Error::InsufficientCounts(format!(
            "no base passes the floor for j={j}, k={k}"
        )));
    }
    let max = entries.iter().map(|e| e.delta).fold(T::neg_infinity(), T::max);
    Ok(OscillationReport { j, k, entries, max })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationEntropy<T> {
    pub n: usize,
    /// Plug-in `H_n = -sum ω̂(I) log ω̂(I)`.
    pub entropy_plugin: T,
    /// Miller-Madow term `(m - 1) / (2 N)`; zero for exact tables.
    pub miller_madow: T,
    /// Corrected entropy, capped at `n log 4`.
    pub entropy: T,
    /// `-log l(n)`.
    pub lyapunov: T,
    /// `d_n = entropy / lyapunov`.
    pub ratio: T,
    pub ratio_plugin: T,
    pub occupied: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport<T> {
    pub generations: Vec<GenerationEntropy<T>>,
    /// `d_depth`.
    pub estimate: T,
    /// `sqrt(sigma_bootstrap^2 + sigma_tail^2)`.
    pub sigma: T,
    pub sigma_bootstrap: T,
    /// Sample standard deviation of the last [`TAIL_WINDOW`] period-aligned ratios.
    pub sigma_tail: T,
    pub n_effective: u64,
}

fn corrected_ratios<T: Real>(
    table: &CylinderMeasureTable,
    lyapunov: &[T],
) -> Vec<GenerationEntropy<T>> {
    let n_eff = table.n_effective();
    let ln4 = T::lit(4f64.ln());
    (1..=table.depth())
        .map(|n| {
            let plugin: T = block_entropy(table.level(n), n_eff);
            let occupied = table.occupied(n);
            let mm = if table.is_exact() || occupied == 0 {
                T::zero()
            } else {
                T::from_count(occupied as u64 - 1) / (T::lit(2.0) * T::from_count(n_eff))
            };
            let entropy = (plugin + mm).min(ln4 * T::from_count(n as u64));
            let lyap = lyapunov[n];
            GenerationEntropy {
                n,
                entropy_plugin: plugin,
                miller_madow: mm,
                entropy,
                lyapunov: lyap,
                ratio: entropy / lyap,
                ratio_plugin: plugin / lyap,
                occupied,
            }
        })
        .collect()
}

/// Entropy-ratio dimension `d_n = H_n / (-log l(n))` for `n = 1..depth`,
/// reporting `d_depth` with an uncertainty that combines the bootstrap spread
/// and the spread of the trailing ratios.
pub fn entropy_ratio_dimension<T: Real>(
    table: &CylinderMeasureTable,
    seq: &ScaleSequence<T>,
    bootstrap: BootstrapConfig,
) -> Result<EntropyReport<T>> {
    let depth = table.depth();
    if depth < 3 {
        return Err(Error::InvalidParams(format!(
            "entropy-ratio dimension needs depth >= 3, got {depth}"
        )));
    }
    let lyapunov: Vec<T> = seq.sidelengths(depth).into_iter().map(|l| -l.ln()).collect();
    let generations = corrected_ratios(table, &lyapunov);
    let estimate = generations[depth - 1].ratio;

    let sigma_bootstrap = if table.is_exact() || bootstrap.resamples < 2 {
        0.0
    } else {
        let mut rng = bootstrap.generator();
        let lyap_last = lyapunov[depth].as_f64();
        let reps: Vec<f64> = (0..bootstrap.resamples)
            .map(|_| {
                let r = table.resample(&mut rng);
                let plugin: f64 = block_entropy(r.level(depth), r.n_effective());
                let m = r.occupied(depth) as f64;
                let h = (plugin + (m - 1.0) / (2.0 * r.n_effective() as f64))
                    .min(depth as f64 * 4f64.ln());
                h / lyap_last
            })
            .collect();
        std_dev(&reps)
    };
    // period-aligned, so a periodic sequence's oscillation is not read as noise
    let p = seq.period().len();
    let step = if depth > p { p } else { 1 };
    let tail: Vec<f64> = (0..TAIL_WINDOW)
        .filter(|i| i * step < depth)
        .map(|i| generations[depth - 1 - i * step].ratio.as_f64())
        .collect();
    let sigma_tail = std_dev(&tail);
    Ok(EntropyReport {
        generations,
        estimate,
        sigma: T::lit(sigma_bootstrap.hypot(sigma_tail)),
        sigma_bootstrap: T::lit(sigma_bootstrap),
        sigma_tail: T::lit(sigma_tail),
        n_effective: table.n_effective(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalDimensionSamples<T> {
    pub generation: usize,
    pub samples: Vec<T>,
    pub mean: T,
    pub std_dev: T,
}

/// Finite-`n` local dimensions `log ω̂(I_n(x)) / log l(n)` at `n = depth`, for
/// `x` drawn proportionally to the table's counts.
pub fn local_dimension_samples<T: Real>(
    table: &CylinderMeasureTable,
    seq: &ScaleSequence<T>,
    sample_count: usize,
    seed: u64,
) -> Result<LocalDimensionSamples<T>> {
    let depth = table.depth();
    if table.n_effective() == 0 {
        return Err(Error::InsufficientCounts("empty table".into()));
    }
    let level = table.level(depth);
    let n = T::from_count(table.n_effective());
    let log_l = seq.sidelength(depth).ln();
    let dist = WeightedIndex::new(level).map_err(|e| Error::InsufficientCounts(e.to_string()))?;
    let mut rng = BootstrapConfig { resamples: 0, seed }.generator();
    let samples: Vec<T> = (0..sample_count)
        .map(|_| {
            let c = level[dist.sample(&mut rng)];
            let v = (T::from_count(c) / n).ln() / log_l;
            // log 1 / log l is -0.0 for a single-cell measure
            v + T::zero()
        })
        .collect();
    let as64: Vec<f64> = samples.iter().map(|s| s.as_f64()).collect();
    Ok(LocalDimensionSamples {
        generation: depth,
        mean: T::lit(if as64.is_empty() { f64::NAN } else { mean(&as64) }),
        std_dev: T::lit(std_dev(&as64)),
        samples,
    })
}

/// `n log 4 / (-log l(n))`: dimension ratio of the uniform measure at generation `n`.
pub fn cantor_ratio<T: Real>(seq: &ScaleSequence<T>, n: usize) -> T {
    // summed logs: l(n) itself underflows for large n
    let lyapunov = (1..=n).fold(T::zero(), |acc, i| acc - seq.ratio(i).ln());
    T::from_count(n as u64) * T::lit(4f64.ln()) / lyapunov
}

/// Finite-`n` liminf proxy for `dim K`: the minimum of [`cantor_ratio`] over
/// the last [`TAIL_WINDOW`] generations up to `n_max` that are multiples of
/// the sequence period. Along those generations the ratio is constant and
/// equals the liminf; off-period generations sit below it. Falls back to all
/// generations when `n_max` is shorter than one period.
pub fn dim_cantor<T: Real>(seq: &ScaleSequence<T>, n_max: usize) -> T {
    assert!(n_max >= 1, "n_max must be at least 1");
    let p = seq.period().len();
    let step = if n_max >= p { p } else { 1 };
    let last = n_max / step;
    let first = last.saturating_sub(TAIL_WINDOW - 1).max(1);
    (first..=last)
        .map(|i| cantor_ratio(seq, i * step))
        .fold(T::infinity(), T::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{TableHeader, TableSource};

    fn sampled(depth: usize, leaves: Vec<u64>) -> CylinderMeasureTable {
        let header = TableHeader {
            depth,
            n_walkers: 0,
            n_effective: 0,
            discarded: 0,
            seed: None,
            fingerprint: String::new(),
            source: TableSource::WalkOnSpheres,
            oracle: false,
            sequence_prefix: vec![],
            params: serde_json::Value::Null,
            metadata: Default::default(),
        };
        CylinderMeasureTable::from_leaf_counts(header, leaves).unwrap()
    }

    #[test]
    fn hk_uniform_is_log4() {
        let t = CylinderMeasureTable::synthetic_uniform(4).unwrap();
        for k in 1..=4 {
            let h: f64 = entropy_hk(&t, &CylinderAddress::root(), k).unwrap();
            assert!((h - 4f64.ln()).abs() < 1e-12);
        }
        assert!((4f64.ln() - 1.386294).abs() < 1e-6);
    }

    #[test]
    fn hk_point_mass_is_zero() {
        let mut leaves = vec![0u64; 16];
        leaves[5] = 1000;
        let t = sampled(2, leaves);
        let h: f64 = entropy_hk(&t, &CylinderAddress::root(), 2).unwrap();
        assert_eq!(h, 0.0);
        let l: f64 = entropy_hk(&t, &"2".parse().unwrap(), 1).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn hk_floor_and_depth_checks() {
        let t = sampled(2, vec![10; 16]);
        assert!(matches!(
            entropy_hk::<f64>(&t, &"1".parse().unwrap(), 1),
            Err(Error::InsufficientCounts(_))
        ));
        assert!(matches!(
            entropy_hk::<f64>(&t, &"1".parse().unwrap(), 2),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn delta_cases() {
        let p = CylinderMeasureTable::synthetic_product(4, [1, 2, 3, 5]).unwrap();
        for k in 1..=2 {
            let d: OscillationEntry<f64> = delta_jk(&p, &CylinderAddress::root(), 2, k).unwrap();
            assert_eq!(d.delta, 0.0);
        }
        let d0: OscillationEntry<f64> = delta_jk(&p, &"3".parse().unwrap(), 0, 2).unwrap();
        assert_eq!(d0.delta, 0.0);
        let sparse = sampled(2, (0..16).map(|i| if i < 4 { 500 } else { 0 }).collect());
        assert!(matches!(
            delta_jk::<f64>(&sparse, &CylinderAddress::root(), 1, 1),
            Err(Error::InsufficientCounts(_))
        ));
    }

    #[test]
    fn delta_invariant_under_symbol_relabeling() {
        let leaves: Vec<u64> = (0..256u64).map(|i| 100 + (i * 37 % 101) * 13).collect();
        let t = sampled(4, leaves.clone());
        let perm = [3u8, 1, 4, 2];
        let mut permuted = vec![0u64; 256];
        for a in CylinderAddress::all(4) {
            permuted[a.relabel(perm).index() as usize] = leaves[a.index() as usize];
        }
        let u = sampled(4, permuted);
        for (j, k) in [(1, 1), (1, 2), (2, 2), (1, 3)] {
            let a: OscillationEntry<f64> = delta_jk(&t, &CylinderAddress::root(), j, k).unwrap();
            let b: OscillationEntry<f64> = delta_jk(&u, &CylinderAddress::root(), j, k).unwrap();
            assert!((a.delta - b.delta).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_rule_exact_on_plugin() {
        let leaves: Vec<u64> = (0..1024u64).map(|i| 100 + (i * 7919 % 997)).collect();
        let t = sampled(5, leaves);
        for base in ["", "2", "41"] {
            let i: CylinderAddress = base.parse().unwrap();
            for j in 1..=2 {
                for k in 1..=2 {
                    if i.generation() + j + k > 5 {
                        continue;
                    }
                    let lhs = (j + k) as f64 * entropy_hk::<f64>(&t, &i, j + k).unwrap();
                    let hj: f64 = entropy_hk(&t, &i, j).unwrap();
                    let rhs: f64 = CylinderAddress::all(j)
                        .map(|jj| {
                            let ij = i.concat(&jj);
                            let w = t.count(&ij) as f64 / t.count(&i) as f64;
                            k as f64 * w * entropy_hk::<f64>(&t, &ij, k).unwrap()
                        })
                        .sum::<f64>()
                        + j as f64 * hj;
                    assert!((lhs - rhs).abs() < 1e-10, "{base} j={j} k={k}");
                }
            }
        }
    }

    #[test]
    fn dim_cantor_examples() {
        let q = ScaleSequence::constant(0.25f64).unwrap();
        assert!((dim_cantor(&q, 10) - 1.0).abs() < 1e-12);
        let t = ScaleSequence::constant(1.0 / 3.0).unwrap();
        assert!((dim_cantor(&t, 10) - 4f64.ln() / 3f64.ln()).abs() < 1e-12);
        assert!((dim_cantor(&t, 1) - 1.26186).abs() < 1e-5);
        let alt = ScaleSequence::periodic(vec![0.2, 0.3]).unwrap();
        let even = cantor_ratio(&alt, 2);
        assert!((even - 2.0 * 4f64.ln() / -(0.06f64.ln())).abs() < 1e-12);
        assert!((even - 0.9855).abs() < 1e-4);
        for n_max in [2, 3, 6, 7, 1000] {
            assert!((dim_cantor(&alt, n_max) - even).abs() < 1e-12);
        }
        // one generation: a_1 = 0.2 alone
        assert!((dim_cantor(&alt, 1) - 4f64.ln() / 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn uniform_ratio_dimension_matches_cantor_ratio() {
        let u = CylinderMeasureTable::synthetic_uniform(5).unwrap();
        for seq in [
            ScaleSequence::constant(0.25f64).unwrap(),
            ScaleSequence::constant(1.0 / 3.0).unwrap(),
            ScaleSequence::periodic(vec![0.2, 0.3]).unwrap(),
        ] {
            let r = entropy_ratio_dimension(&u, &seq, BootstrapConfig::default()).unwrap();
            for g in &r.generations {
                assert!((g.ratio - cantor_ratio(&seq, g.n)).abs() < 1e-10);
                assert_eq!(g.miller_madow, 0.0);
            }
            assert_eq!(r.sigma_bootstrap, 0.0);
        }
    }

    #[test]
    fn ratio_dimension_needs_depth_three() {
        let u = CylinderMeasureTable::synthetic_uniform(2).unwrap();
        let seq = ScaleSequence::constant(0.25).unwrap();
        assert!(entropy_ratio_dimension(&u, &seq, BootstrapConfig::default()).is_err());
    }

    #[test]
    fn local_dimension_examples() {
        let u = CylinderMeasureTable::synthetic_uniform(3).unwrap();
        let seq = ScaleSequence::constant(0.25f64).unwrap();
        let s = local_dimension_samples(&u, &seq, 100, 1).unwrap();
        assert!(s.samples.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let point = CylinderMeasureTable::synthetic(3, |a| u64::from(a.index() == 9)).unwrap();
        let s = local_dimension_samples(&point, &seq, 10, 1).unwrap();
        assert!(s.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn entropy_bounds_hold() {
        let leaves: Vec<u64> = (0..256u64).map(|i| (i * i) % 17).collect();
        let t = sampled(4, leaves);
        let seq = ScaleSequence::constant(0.3).unwrap();
        let r = entropy_ratio_dimension(&t, &seq, BootstrapConfig { resamples: 50, seed: 1 }).unwrap();
        for g in &r.generations {
            let cap = g.n as f64 * 4f64.ln();
            assert!(g.entropy >= 0.0 && g.entropy <= cap + 1e-12);
            assert!(g.ratio >= 0.0 && g.ratio <= cap / g.lyapunov + 1e-12);
        }
    }
}
