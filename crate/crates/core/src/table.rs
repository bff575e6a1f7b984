//! Cylinder exit-count tables.
//!
//! A table stores full-depth counts; every shallower generation is the sum of
//! its descendants, so the partition identity holds by construction.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::address::{CylinderAddress, MAX_GENERATION};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::stats::{wilson, Estimate, Z95};

/// Minimum count for a cell to enter a ratio statistic on sampled tables.
pub const COUNT_FLOOR: u64 = 100;

/// Largest depth a table will allocate (`4^12` leaves).
pub const MAX_TABLE_DEPTH: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableSource {
    WalkOnSpheres,
    LatticeOracle,
    /// An exact measure given by integer weights rather than sampled counts.
    Synthetic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableHeader {
    pub depth: usize,
    pub n_walkers: u64,
    pub n_effective: u64,
    pub discarded: u64,
    pub seed: Option<u64>,
    pub fingerprint: String,
    pub source: TableSource,
    pub oracle: bool,
    /// `a_1..a_depth`.
    pub sequence_prefix: Vec<f64>,
    pub params: serde_json::Value,
    #[serde(default)]
    pub metadata: BTreeMap<String, f64>,
}

/// First 16 hex digits of the SHA-256 of the sequence prefix and parameters.
pub fn fingerprint(sequence_prefix: &[f64], params: &serde_json::Value) -> String {
    let payload = serde_json::json!({ "sequence": sequence_prefix, "params": params });
    let digest = Sha256::digest(payload.to_string().as_bytes());
    hex::encode(&digest[..8])
}

#[derive(Clone, Debug, PartialEq)]
pub struct CylinderMeasureTable {
    header: TableHeader,
    /// `levels[n][index]` is the count of the generation-`n` cylinder.
    levels: Vec<Vec<u64>>,
}

impl CylinderMeasureTable {
    /// Builds the tower from full-depth counts. `header.n_effective` is set from the counts.
    pub fn from_leaf_counts(mut header: TableHeader, leaves: Vec<u64>) -> Result<Self> {
        let depth = header.depth;
        if depth > MAX_TABLE_DEPTH {
            return Err(Error::CostGuard(format!(
                "table depth {depth} exceeds {MAX_TABLE_DEPTH}"
            )));
        }
        if leaves.len() != 1usize << (2 * depth) {
            return Err(Error::Format(format!(
                "expected {} leaf counts for depth {depth}, got {}",
                1usize << (2 * depth),
                leaves.len()
            )));
        }
        let mut levels = vec![Vec::new(); depth + 1];
        levels[depth] = leaves;
        for n in (0..depth).rev() {
            levels[n] = levels[n + 1].chunks_exact(4).map(|c| c.iter().sum()).collect();
        }
        header.n_effective = levels[0][0];
        Ok(Self { header, levels })
    }

    /// Exact measure with leaf weight `weight(leaf address)`.
    pub fn synthetic(depth: usize, weight: impl Fn(&CylinderAddress) -> u64) -> Result<Self> {
        let leaves: Vec<u64> = CylinderAddress::all(depth).map(|a| weight(&a)).collect();
        let total: u64 = leaves.iter().sum();
        let params = serde_json::json!({ "synthetic": true });
        let header = TableHeader {
            depth,
            n_walkers: total,
            n_effective: total,
            discarded: 0,
            seed: None,
            fingerprint: fingerprint(&[], &params),
            source: TableSource::Synthetic,
            oracle: false,
            sequence_prefix: Vec::new(),
            params,
            metadata: BTreeMap::new(),
        };
        Self::from_leaf_counts(header, leaves)
    }

    /// The uniform measure `4^{-depth}` on every leaf.
    pub fn synthetic_uniform(depth: usize) -> Result<Self> {
        Self::synthetic(depth, |_| 1)
    }

    /// Product measure: every leaf gets `prod weights[symbol - 1]`, so all
    /// conditional laws are identical.
    pub fn synthetic_product(depth: usize, weights: [u64; 4]) -> Result<Self> {
        Self::synthetic(depth, |a| {
            a.word().iter().map(|&s| weights[usize::from(s - 1)]).product()
        })
    }

    pub fn header(&self) -> &TableHeader {
        &self.header
    }

    pub fn header_mut(&mut self) -> &mut TableHeader {
        &mut self.header
    }

    pub fn depth(&self) -> usize {
        self.header.depth
    }

    pub fn n_effective(&self) -> u64 {
        self.header.n_effective
    }

    pub fn is_exact(&self) -> bool {
        self.header.source == TableSource::Synthetic
    }

    /// Cell floor for ratio statistics: [`COUNT_FLOOR`] for sampled tables, none for exact ones.
    pub fn count_floor(&self) -> u64 {
        if self.is_exact() {
            0
        } else {
            COUNT_FLOOR
        }
    }

    pub fn level(&self, generation: usize) -> &[u64] {
        &self.levels[generation]
    }

    #[inline]
    pub fn count_at(&self, generation: usize, index: u64) -> u64 {
        self.levels[generation][index as usize]
    }

    /// # Panics
    /// If the address is deeper than the table.
    pub fn count(&self, addr: &CylinderAddress) -> u64 {
        assert!(
            addr.generation() <= self.depth(),
            "address {addr} deeper than table depth {}",
            self.depth()
        );
        self.count_at(addr.generation(), addr.index())
    }

    /// `ω̂(I)` with a Wilson 95% interval (degenerate for exact tables).
    pub fn probability<T: Real>(&self, addr: &CylinderAddress) -> Estimate<T> {
        let k = self.count(addr);
        let n = self.n_effective();
        if self.is_exact() {
            return Estimate::exact(T::from_count(k) / T::from_count(n));
        }
        wilson(k, n, Z95)
    }

    /// `ω̂(IJ) / ω̂(I)`; the interval is the Wilson interval of `count(IJ)` out of `count(I)`.
    pub fn conditional<T: Real>(
        &self,
        base: &CylinderAddress,
        tail: &CylinderAddress,
    ) -> Result<Estimate<T>> {
        let parent = self.count(base);
        if parent == 0 {
            return Err(Error::UndefinedConditional(base.to_string()));
        }
        let child = self.count(&base.concat(tail));
        if self.is_exact() {
            return Ok(Estimate::exact(
                T::from_count(child) / T::from_count(parent),
            ));
        }
        Ok(wilson(child, parent, Z95))
    }

    /// Number of occupied cells at `generation`.
    pub fn occupied(&self, generation: usize) -> usize {
        self.levels[generation].iter().filter(|&&c| c > 0).count()
    }

    /// One multinomial bootstrap replicate: equivalent to resampling walkers
    /// with replacement, drawn by binomial splitting down the tree.
    pub fn resample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        self.resample_to(self.n_effective(), rng)
    }

    /// Multinomial draw of `total` walkers from this table's empirical law.
    pub fn resample_to<R: Rng + ?Sized>(&self, total: u64, rng: &mut R) -> Self {
        let depth = self.depth();
        let mut current = vec![if self.n_effective() == 0 { 0 } else { total }];
        for g in 1..=depth {
            let src = &self.levels[g];
            let mut next = vec![0u64; src.len()];
            for (p, &n_parent) in current.iter().enumerate() {
                let orig_parent = self.levels[g - 1][p];
                if n_parent == 0 || orig_parent == 0 {
                    continue;
                }
                let mut remaining = n_parent;
                let mut mass_left = orig_parent;
                for k in 0..4 {
                    let c = src[4 * p + k];
                    let draw = if k == 3 || c == mass_left {
                        remaining
                    } else if c == 0 {
                        0
                    } else {
                        let prob = (c as f64 / mass_left as f64).clamp(0.0, 1.0);
                        Binomial::new(remaining, prob)
                            .expect("valid binomial")
                            .sample(rng)
                    };
                    next[4 * p + k] = draw;
                    remaining -= draw;
                    mass_left -= c;
                    if remaining == 0 {
                        break;
                    }
                }
            }
            current = next;
        }
        let mut header = self.header.clone();
        header.n_walkers = total;
        header.discarded = 0;
        Self::from_leaf_counts(header, current).expect("same shape")
    }

    /// Writes the CSV table preceded by a `# {json header}` line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# {}", serde_json::to_string(&self.header)?)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["address", "count", "probability", "wilson_lo", "wilson_hi"])?;
        for g in 0..=self.depth() {
            for addr in CylinderAddress::all(g) {
                let p: Estimate<f64> = self.probability(&addr);
                w.write_record([
                    addr.to_string(),
                    self.count(&addr).to_string(),
                    format!("{:e}", p.value),
                    format!("{:e}", p.lo),
                    format!("{:e}", p.hi),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let json = first
            .trim_end()
            .strip_prefix("# ")
            .ok_or_else(|| Error::Format("missing '# {json}' header line".into()))?;
        let header: TableHeader = serde_json::from_str(json)?;
        let depth = header.depth;
        if depth > MAX_TABLE_DEPTH.min(MAX_GENERATION) {
            return Err(Error::Format(format!("depth {depth} too large")));
        }
        let mut rows: Vec<(CylinderAddress, u64)> = Vec::new();
        let mut r = csv::Reader::from_reader(reader);
        for rec in r.records() {
            let rec = rec?;
            let addr: CylinderAddress = rec
                .get(0)
                .ok_or_else(|| Error::Format("missing address".into()))?
                .parse()?;
            let count: u64 = rec
                .get(1)
                .ok_or_else(|| Error::Format("missing count".into()))?
                .parse()
                .map_err(|e| Error::Format(format!("bad count: {e}")))?;
            if addr.generation() > depth {
                return Err(Error::Format(format!("address {addr} deeper than {depth}")));
            }
            rows.push((addr, count));
        }
        let mut leaves = vec![0u64; 1usize << (2 * depth)];
        let mut seen = vec![false; leaves.len()];
        for (a, c) in rows.iter().filter(|(a, _)| a.generation() == depth) {
            leaves[a.index() as usize] = *c;
            seen[a.index() as usize] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Format("missing leaf rows".into()));
        }
        let expected_n = header.n_effective;
        let table = Self::from_leaf_counts(header, leaves)?;
        if table.n_effective() != expected_n {
            return Err(Error::Format(format!(
                "leaf counts sum to {}, header says {expected_n}",
                table.n_effective()
            )));
        }
        for (a, c) in &rows {
            if table.count(a) != *c {
                return Err(Error::Format(format!(
                    "row {a} count {c} breaks the partition identity"
                )));
            }
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
