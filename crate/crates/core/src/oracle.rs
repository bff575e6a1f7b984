//! Brute-force lattice oracle for shallow cylinder harmonic measures.
//!
//! Simple random walk on `hZ^2`, started uniformly on a circle enclosing the
//! unit square, absorbed at any lattice site inside a generation-`depth`
//! square, and sent back to the start circle whenever it leaves the outer
//! circle, at a point drawn from the exterior Poisson kernel by rejection.
//! Uses its own generator family (xoshiro via `SmallRng`)
//! and seed derivation, independent of the walk-on-spheres engine.

use std::collections::BTreeMap;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{set_radius, CantorGeometry};
use crate::rng::derive_seed;
use crate::sequence::ScaleSequence;
use crate::table::{fingerprint, CylinderMeasureTable, TableHeader, TableSource};

pub const MAX_ORACLE_DEPTH: usize = 3;

const ORACLE_TAG: u64 = 0x6F72_6163_6C65;
const BATCH: u64 = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOracleParams {
    pub depth: usize,
    /// Lattice spacing `h`.
    pub spacing: f64,
    pub start_radius: f64,
    pub outer_radius: f64,
    pub walkers: u64,
    /// Per-walker lattice-step guard.
    pub max_steps: u64,
}

impl GridOracleParams {
    pub const DEFAULT_START_RADIUS: f64 = 0.75;
    pub const DEFAULT_OUTER_RADIUS: f64 = 1.0;

    /// `h = min(l(depth) / 8, 1/32)`, start circle 0.75, outer circle 1.0.
    pub fn defaults(seq: &ScaleSequence<f64>, depth: usize, walkers: u64) -> Self {
        Self {
            depth,
            spacing: (seq.sidelength(depth) / 8.0).min(1.0 / 32.0),
            start_radius: Self::DEFAULT_START_RADIUS,
            outer_radius: Self::DEFAULT_OUTER_RADIUS,
            walkers,
            max_steps: 1 << 32,
        }
    }

    pub fn validate(&self, seq: &ScaleSequence<f64>) -> Result<()> {
        if self.depth > MAX_ORACLE_DEPTH {
            return Err(Error::CostGuard(format!(
                "lattice oracle limited to depth <= {MAX_ORACLE_DEPTH}, got {}",
                self.depth
            )));
        }
        let l = seq.sidelength(self.depth);
        if !(self.spacing > 0.0 && self.spacing <= l / 8.0 * (1.0 + 1e-12)) {
            return Err(Error::InvalidParams(format!(
                "spacing {} must lie in (0, l(depth)/8 = {}]",
                self.spacing,
                l / 8.0
            )));
        }
        // rounding to the lattice moves a start point by at most h / sqrt(2)
        if self.start_radius - self.spacing <= set_radius::<f64>() {
            return Err(Error::InvalidParams(
                "start circle (after lattice rounding) must enclose the unit square".into(),
            ));
        }
        if self.outer_radius <= self.start_radius + 2.0 * self.spacing {
            return Err(Error::InvalidParams(
                "outer radius must exceed the start radius by at least two lattice steps".into(),
            ));
        }
        if self.walkers == 0 {
            return Err(Error::InvalidParams("walkers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain struct")
    }
}

/// Absorption labels on the lattice sites of `[0, 1]^2`.
struct Lattice {
    h: f64,
    /// Sites per side of the label box, `0..=n`.
    n: i64,
    /// `leaf + 1`, or 0 for free sites.
    labels: Vec<u32>,
    center: f64,
    outer2: f64,
}

impl Lattice {
    fn new(seq: &ScaleSequence<f64>, p: &GridOracleParams) -> Self {
        let geo = CantorGeometry::new(seq, p.depth);
        let h = p.spacing;
        let n = (1.0 / h).floor() as i64;
        let side = (n + 1) as usize;
        let mut labels = vec![0u32; side * side];
        for i in 0..=n {
            for j in 0..=n {
                if let Some(leaf) = geo.containing_leaf([i as f64 * h, j as f64 * h]) {
                    labels[i as usize * side + j as usize] = leaf as u32 + 1;
                }
            }
        }
        let r = p.outer_radius / h;
        Self {
            h,
            n,
            labels,
            center: 0.5 / h,
            outer2: r * r,
        }
    }

    #[inline]
    fn label(&self, i: i64, j: i64) -> u32 {
        self.labels[i as usize * (self.n as usize + 1) + j as usize]
    }

    fn start_site<R: Rng>(&self, radius: f64, rng: &mut R) -> (i64, i64) {
        self.site_at(radius, rng.random::<f64>() * std::f64::consts::TAU)
    }

    fn site_at(&self, radius: f64, theta: f64) -> (i64, i64) {
        let r = radius / self.h;
        (
            (self.center + r * theta.cos()).round() as i64,
            (self.center + r * theta.sin()).round() as i64,
        )
    }

    /// Absorbing leaf index, or `None` if the step guard trips.
    fn walk<R: Rng>(&self, p: &GridOracleParams, rng: &mut R) -> Option<u64> {
        let (mut i, mut j) = self.start_site(p.start_radius, rng);
        let mut steps = 0u64;
        loop {
            let mut bits = rng.next_u64();
            for _ in 0..32 {
                match bits & 3 {
                    0 => i += 1,
                    1 => i -= 1,
                    2 => j += 1,
                    _ => j -= 1,
                }
                bits >>= 2;
                if (0..=self.n).contains(&i) && (0..=self.n).contains(&j) {
                    let lab = self.label(i, j);
                    if lab != 0 {
                        return Some(u64::from(lab - 1));
                    }
                } else {
                    let dx = i as f64 - self.center;
                    let dy = j as f64 - self.center;
                    let d2 = dx * dx + dy * dy;
                    if d2 > self.outer2 {
                        let rho = d2.sqrt() * self.h / p.start_radius;
                        let theta = dy.atan2(dx) + kernel_offset(rho, rng);
                        (i, j) = self.site_at(p.start_radius, theta);
                    }
                }
            }
            steps += 32;
            if steps >= p.max_steps {
                return None;
            }
        }
    }
}

/// Angle offset of the first hit on a circle from a point at `rho` times its
/// radius. Uniform proposals, accepted with probability
/// `(rho - 1)^2 / (rho^2 - 2 rho cos(phi) + 1)` (the density over its peak).
fn kernel_offset<R: Rng>(rho: f64, rng: &mut R) -> f64 {
    loop {
        let phi = (rng.random::<f64>() - 0.5) * std::f64::consts::TAU;
        let accept = (rho - 1.0).powi(2) / (rho * rho - 2.0 * rho * phi.cos() + 1.0);
        if rng.random::<f64>() < accept {
            return phi;
        }
    }
}

/// Lattice estimate of the depth-`depth` cylinder measures, as a count table
/// flagged `oracle: true`.
pub fn grid_harmonic_measure(
    seq: &ScaleSequence<f64>,
    params: &GridOracleParams,
    seed: u64,
    workers: usize,
) -> Result<CylinderMeasureTable> {
    params.validate(seq)?;
    let lattice = Lattice::new(seq, params);
    let cells = 1usize << (2 * params.depth);
    let base = derive_seed(seed, ORACLE_TAG);
    let batches = params.walkers.div_ceil(BATCH);
    let run_batch = |b: u64| -> (Vec<u64>, u64) {
        let mut counts = vec![0u64; cells];
        let mut discarded = 0;
        for w in b * BATCH..((b + 1) * BATCH).min(params.walkers) {
            let mut rng = SmallRng::seed_from_u64(derive_seed(base, w));
            match lattice.walk(params, &mut rng) {
                Some(leaf) => counts[leaf as usize] += 1,
                None => discarded += 1,
            }
        }
        (counts, discarded)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    let (counts, discarded) = pool.install(|| {
        (0..batches).into_par_iter().map(run_batch).reduce(
            || (vec![0u64; cells], 0),
            |(mut a, da), (b, db)| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                (a, da + db)
            },
        )
    });
    if discarded as f64 > crate::wos::MAX_DISCARDED_FRACTION * params.walkers as f64 {
        return Err(Error::TooManyDiscarded {
            discarded,
            walkers: params.walkers,
        });
    }
    let prefix = seq.prefix_f64(params.depth);
    let pj = params.to_json();
    let header = TableHeader {
        depth: params.depth,
        n_walkers: params.walkers,
        n_effective: 0,
        discarded,
        seed: Some(seed),
        fingerprint: fingerprint(&prefix, &pj),
        source: TableSource::LatticeOracle,
        oracle: true,
        sequence_prefix: prefix,
        params: pj,
        metadata: BTreeMap::new(),
    };
    CylinderMeasureTable::from_leaf_counts(header, counts)
}

/// Largest absolute difference of full-depth cylinder probabilities.
pub fn max_probability_difference(a: &CylinderMeasureTable, b: &CylinderMeasureTable) -> Result<f64> {
    if a.depth() != b.depth() {
        return Err(Error::DepthMismatch(a.depth(), b.depth()));
    }
    let (na, nb) = (a.n_effective() as f64, b.n_effective() as f64);
    Ok(a.level(a.depth())
        .iter()
        .zip(b.level(b.depth()))
        .map(|(&x, &y)| (x as f64 / na - y as f64 / nb).abs())
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RichardsonReport {
    pub spacing: f64,
    pub max_abs_difference: f64,
    /// `sqrt(p(1-p)/N_h + p(1-p)/N_{h/2})` at the maximizing cell.
    pub combined_std_error: f64,
    pub coarse: CylinderMeasureTable,
    pub fine: CylinderMeasureTable,
}

/// Runs the oracle at `h` and `h/2` with the same seed and compares them.
/// The difference is recorded in the coarse table's metadata.
pub fn richardson_check(
    seq: &ScaleSequence<f64>,
    params: &GridOracleParams,
    seed: u64,
    workers: usize,
) -> Result<RichardsonReport> {
    let mut coarse = grid_harmonic_measure(seq, params, seed, workers)?;
    let fine_params = GridOracleParams {
        spacing: params.spacing / 2.0,
        max_steps: params.max_steps.saturating_mul(4),
        ..*params
    };
    let fine = grid_harmonic_measure(seq, &fine_params, seed, workers)?;
    let (na, nb) = (coarse.n_effective() as f64, fine.n_effective() as f64);
    let (mut diff, mut se) = (0.0f64, 0.0);
    for (&x, &y) in coarse.level(params.depth).iter().zip(fine.level(params.depth)) {
        let (p, q) = (x as f64 / na, y as f64 / nb);
        if (p - q).abs() >= diff {
            diff = (p - q).abs();
            se = (p * (1.0 - p) / na + q * (1.0 - q) / nb).sqrt();
        }
    }
    coarse
        .header_mut()
        .metadata
        .insert("richardson_max_abs_difference".into(), diff);
    Ok(RichardsonReport {
        spacing: params.spacing,
        max_abs_difference: diff,
        combined_std_error: se,
        coarse,
        fine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quarter() -> ScaleSequence<f64> {
        ScaleSequence::constant(0.25).unwrap()
    }

    #[test]
    fn cost_guard_and_validation() {
        let seq = quarter();
        let p = GridOracleParams::defaults(&seq, 4, 10);
        assert!(matches!(grid_harmonic_measure(&seq, &p, 1, 1), Err(Error::CostGuard(_))));
        let mut p = GridOracleParams::defaults(&seq, 2, 10);
        p.spacing *= 2.0;
        assert!(p.validate(&seq).is_err());
        let mut p = GridOracleParams::defaults(&seq, 1, 10);
        p.start_radius = 0.7;
        assert!(p.validate(&seq).is_err());
        let mut p = GridOracleParams::defaults(&seq, 1, 10);
        p.outer_radius = p.start_radius;
        assert!(p.validate(&seq).is_err());
    }

    #[test]
    fn rejection_kernel_matches_closed_form() {
        let mut rng = SmallRng::seed_from_u64(3);
        for rho in [1.05, 4.0 / 3.0, 3.0] {
            let mut xs: Vec<f64> = (0..20_000).map(|_| kernel_offset(rho, &mut rng)).collect();
            xs.sort_by(f64::total_cmp);
            let n = xs.len() as f64;
            let d = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = crate::wos::reentry_offset_cdf(rho, x);
                    (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
                })
                .fold(0.0, f64::max);
            assert!(d < 1.63 / n.sqrt(), "rho {rho}: KS {d}");
        }
    }

    #[test]
    fn depth_zero_is_trivial() {
        let seq = quarter();
        let p = GridOracleParams::defaults(&seq, 0, 200);
        let t = grid_harmonic_measure(&seq, &p, 1, 1).unwrap();
        assert_eq!(t.n_effective(), 200);
        assert!(t.header().oracle);
    }

    #[test]
    fn same_spacing_same_seed_is_identical() {
        let seq = quarter();
        let p = GridOracleParams::defaults(&seq, 1, 2000);
        let a = grid_harmonic_measure(&seq, &p, 9, 1).unwrap();
        let b = grid_harmonic_measure(&seq, &p, 9, 4).unwrap();
        assert_eq!(max_probability_difference(&a, &b).unwrap(), 0.0);
        assert_eq!(a, b);
    }

    #[test]
    fn depth_one_symmetry() {
        let seq = quarter();
        let p = GridOracleParams::defaults(&seq, 1, 40_000);
        let t = grid_harmonic_measure(&seq, &p, 3, 1).unwrap();
        let n = t.n_effective() as f64;
        let se = (0.25f64 * 0.75 / n).sqrt();
        for &c in t.level(1) {
            assert!((c as f64 / n - 0.25).abs() < 5.0 * se);
        }
    }
}
