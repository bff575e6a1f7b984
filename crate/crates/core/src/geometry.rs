//! Square geometry of the construction and exact distance queries against a
//! finite-depth approximation `K_depth` (the union of all generation-`depth`
//! squares).
//!
//! Corner convention for the four children of a square:
//! `1` lower-left, `2` lower-right, `3` upper-right, `4` upper-left.
//! Squares are closed; they are pairwise disjoint because every ratio is
//! strictly below one half.

use crate::address::CylinderAddress;
use crate::real::Real;
use crate::sequence::ScaleSequence;

/// `(dx, dy)` corner selector for digit `symbol - 1`.
const CORNER: [(bool, bool); 4] = [(false, false), (true, false), (true, true), (false, true)];

/// Centre of the unit square and of the set's circumscribing disk.
pub fn set_center<T: Real>() -> [T; 2] {
    [T::lit(0.5), T::lit(0.5)]
}

/// Radius `sqrt(2)/2` of the circumscribing disk.
pub fn set_radius<T: Real>() -> T {
    T::SQRT_2() / T::lit(2.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquareRegion<T> {
    pub center: [T; 2],
    pub side: T,
}

impl<T: Real> SquareRegion<T> {
    pub fn unit() -> Self {
        Self {
            center: set_center(),
            side: T::one(),
        }
    }

    fn from_lower_left(x: T, y: T, side: T) -> Self {
        let h = side / T::lit(2.0);
        Self {
            center: [x + h, y + h],
            side,
        }
    }

    pub fn lower_left(&self) -> [T; 2] {
        let h = self.side / T::lit(2.0);
        [self.center[0] - h, self.center[1] - h]
    }

    /// Closed-square membership.
    pub fn contains_point(&self, p: [T; 2]) -> bool {
        let h = self.side / T::lit(2.0);
        (p[0] - self.center[0]).abs() <= h && (p[1] - self.center[1]).abs() <= h
    }

    pub fn contains_square(&self, other: &Self) -> bool {
        // corner children share two edges with the parent; allow rounding of
        // unit-square coordinates
        let h = self.side / T::lit(2.0) + T::lit(8.0) * T::epsilon();
        let k = other.side / T::lit(2.0);
        (other.center[0] - self.center[0]).abs() + k <= h
            && (other.center[1] - self.center[1]).abs() + k <= h
    }

    pub fn distance2(&self, p: [T; 2]) -> T {
        let [x, y] = self.lower_left();
        square_distance2(p, x, y, self.side)
    }

    pub fn distance(&self, p: [T; 2]) -> T {
        self.distance2(p).sqrt()
    }
}

#[inline(always)]
fn square_distance2<T: Real>(p: [T; 2], x: T, y: T, side: T) -> T {
    let z = T::zero();
    let dx = (x - p[0]).max(p[0] - (x + side)).max(z);
    let dy = (y - p[1]).max(p[1] - (y + side)).max(z);
    dx * dx + dy * dy
}

/// Result of a nearest-square query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nearest<T> {
    pub distance2: T,
    /// Packed index of the nearest generation-`depth` square (see
    /// [`CylinderAddress::index`]).
    pub leaf: u64,
}

impl<T: Real> Nearest<T> {
    pub fn distance(&self) -> T {
        self.distance2.sqrt()
    }
}

/// Precomputed sidelengths of one depth-`depth` approximation. Immutable and
/// shareable across threads.
#[derive(Clone, Debug)]
pub struct CantorGeometry<T> {
    depth: usize,
    sides: Vec<T>,
    /// `offsets[g] = l(g-1) - l(g)`: shift of a far-corner child inside its parent.
    offsets: Vec<T>,
}

impl<T: Real> CantorGeometry<T> {
    pub fn new(seq: &ScaleSequence<T>, depth: usize) -> Self {
        assert!(
            depth <= crate::address::MAX_GENERATION,
            "depth {depth} exceeds the packed-index limit"
        );
        let sides = seq.sidelengths(depth);
        let mut offsets = vec![T::zero(); depth + 1];
        for g in 1..=depth {
            offsets[g] = sides[g - 1] - sides[g];
        }
        Self {
            depth,
            sides,
            offsets,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `l(n)` for `n <= depth`.
    pub fn side(&self, n: usize) -> T {
        self.sides[n]
    }

    /// Square of an address of generation at most `depth`.
    pub fn square_of(&self, addr: &CylinderAddress) -> SquareRegion<T> {
        assert!(addr.generation() <= self.depth);
        let (mut x, mut y) = (T::zero(), T::zero());
        for (g, &s) in addr.word().iter().enumerate() {
            let (dx, dy) = CORNER[usize::from(s - 1)];
            let off = self.offsets[g + 1];
            if dx {
                x = x + off;
            }
            if dy {
                y = y + off;
            }
        }
        SquareRegion::from_lower_left(x, y, self.sides[addr.generation()])
    }

    /// Exact nearest generation-`depth` square by best-first descent: children
    /// are visited nearest first and a subtree is pruned as soon as the
    /// distance to its enclosing square is no smaller than the best leaf
    /// distance found so far.
    pub fn nearest(&self, p: [T; 2]) -> Nearest<T> {
        let mut best = Nearest {
            distance2: T::infinity(),
            leaf: 0,
        };
        if self.depth == 0 {
            best.distance2 = square_distance2(p, T::zero(), T::zero(), T::one());
            return best;
        }
        self.descend(p, T::zero(), T::zero(), 0, 0, &mut best);
        best
    }

    fn descend(&self, p: [T; 2], x: T, y: T, gen: usize, idx: u64, best: &mut Nearest<T>) {
        let child = gen + 1;
        let side = self.sides[child];
        let off = self.offsets[child];
        let mut kids: [(T, T, T, u64); 4] = [(T::zero(), T::zero(), T::zero(), 0); 4];
        for (k, &(dx, dy)) in CORNER.iter().enumerate() {
            let cx = if dx { x + off } else { x };
            let cy = if dy { y + off } else { y };
            kids[k] = (square_distance2(p, cx, cy, side), cx, cy, (idx << 2) | k as u64);
        }
        // insertion sort by distance
        for i in 1..4 {
            let mut j = i;
            while j > 0 && kids[j].0 < kids[j - 1].0 {
                kids.swap(j, j - 1);
                j -= 1;
            }
        }
        for &(d2, cx, cy, cidx) in &kids {
            if d2 >= best.distance2 {
                break;
            }
            if child == self.depth {
                best.distance2 = d2;
                best.leaf = cidx;
            } else {
                self.descend(p, cx, cy, child, cidx, best);
            }
        }
    }

    pub fn distance(&self, p: [T; 2]) -> T {
        self.nearest(p).distance()
    }

    /// Packed index of the generation-`depth` square containing `p`, if any.
    pub fn containing_leaf(&self, p: [T; 2]) -> Option<u64> {
        let (mut x, mut y) = (T::zero(), T::zero());
        if !SquareRegion::from_lower_left(x, y, T::one()).contains_point(p) {
            return None;
        }
        let mut idx = 0u64;
        for g in 1..=self.depth {
            let side = self.sides[g];
            let off = self.offsets[g];
            let pick = |v: T, lo: T| -> Option<bool> {
                if v >= lo && v <= lo + side {
                    Some(false)
                } else if v >= lo + off && v <= lo + off + side {
                    Some(true)
                } else {
                    None
                }
            };
            let dx = pick(p[0], x)?;
            let dy = pick(p[1], y)?;
            let digit = CORNER.iter().position(|&c| c == (dx, dy)).unwrap() as u64;
            if dx {
                x = x + off;
            }
            if dy {
                y = y + off;
            }
            idx = (idx << 2) | digit;
        }
        Some(idx)
    }

    pub fn containing_cylinder(&self, p: [T; 2]) -> Option<CylinderAddress> {
        self.containing_leaf(p)
            .map(|i| CylinderAddress::from_index(i, self.depth))
    }
}

/// Square `I_w` of any generation for `seq`.
pub fn square_of<T: Real>(addr: &CylinderAddress, seq: &ScaleSequence<T>) -> SquareRegion<T> {
    CantorGeometry::new(seq, addr.generation()).square_of(addr)
}

/// Euclidean distance from `p` to `K_depth`.
pub fn distance_to_approximation<T: Real>(p: [T; 2], seq: &ScaleSequence<T>, depth: usize) -> T {
    CantorGeometry::new(seq, depth).distance(p)
}

/// `I_depth(p)`: the generation-`depth` address whose closed square contains `p`.
pub fn containing_cylinder<T: Real>(
    p: [T; 2],
    seq: &ScaleSequence<T>,
    depth: usize,
) -> Option<CylinderAddress> {
    CantorGeometry::new(seq, depth).containing_cylinder(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn quarter() -> ScaleSequence<f64> {
        ScaleSequence::constant(0.25).unwrap()
    }

    #[test]
    fn root_is_unit_square() {
        let s = square_of(&CylinderAddress::root(), &quarter());
        assert_eq!(s.center, [0.5, 0.5]);
        assert_eq!(s.side, 1.0);
    }

    #[test]
    fn corner_convention() {
        let seq = quarter();
        let s1 = square_of(&"1".parse().unwrap(), &seq);
        assert_eq!(s1.center, [0.125, 0.125]);
        assert_eq!(s1.side, 0.25);
        let s13 = square_of(&"13".parse().unwrap(), &seq);
        assert!((s13.center[0] - 0.21875).abs() < 1e-15);
        assert!((s13.center[1] - 0.21875).abs() < 1e-15);
        assert_eq!(s13.side, 1.0 / 16.0);
        assert_eq!(square_of(&"2".parse().unwrap(), &seq).center, [0.875, 0.125]);
        assert_eq!(square_of(&"3".parse().unwrap(), &seq).center, [0.875, 0.875]);
        assert_eq!(square_of(&"4".parse().unwrap(), &seq).center, [0.125, 0.875]);
    }

    #[test]
    fn distance_from_center_depth_one() {
        let d = distance_to_approximation([0.5, 0.5], &quarter(), 1);
        assert!((d - 2f64.sqrt() * 0.25).abs() < 1e-15);
    }

    #[test]
    fn distance_zero_inside_square() {
        let seq = quarter();
        let sq = square_of(&"42".parse().unwrap(), &seq);
        assert_eq!(distance_to_approximation(sq.center, &seq, 2), 0.0);
    }

    #[test]
    fn depth_zero_distance_is_to_unit_square() {
        let g = CantorGeometry::new(&quarter(), 0);
        assert_eq!(g.distance([0.5, 0.5]), 0.0);
        assert!((g.distance([2.0, 0.5]) - 1.0).abs() < 1e-15);
    }

    fn brute_force(p: [f64; 2], g: &CantorGeometry<f64>) -> f64 {
        CylinderAddress::all(g.depth())
            .map(|a| g.square_of(&a).distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn distance_matches_brute_force_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for seq in [
            quarter(),
            ScaleSequence::constant(1.0 / 3.0).unwrap(),
            ScaleSequence::periodic(vec![0.2, 0.3, 0.45]).unwrap(),
        ] {
            let g = CantorGeometry::new(&seq, 4);
            for _ in 0..1000 {
                let p = [rng.random_range(-0.5..1.5), rng.random_range(-0.5..1.5)];
                let fast = g.distance(p);
                assert!((fast - brute_force(p, &g)).abs() <= 1e-12, "at {p:?}");
            }
        }
    }

    #[test]
    fn nearest_leaf_is_a_true_minimizer() {
        let g = CantorGeometry::new(&ScaleSequence::constant(0.3f64).unwrap(), 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let n = g.nearest(p);
            let sq = g.square_of(&CylinderAddress::from_index(n.leaf, 3));
            assert!((sq.distance2(p) - n.distance2).abs() < 1e-15);
        }
    }

    #[test]
    fn containing_cylinder_examples() {
        let seq = quarter();
        assert_eq!(
            containing_cylinder([0.01, 0.01], &seq, 1).unwrap().to_string(),
            "1"
        );
        for depth in 1..5 {
            assert!(containing_cylinder([0.5, 0.5], &seq, depth).is_none());
            assert!(containing_cylinder([0.5, 0.5], &ScaleSequence::constant(0.45).unwrap(), depth).is_none());
        }
        assert!(containing_cylinder([1.5, 0.5], &seq, 0).is_none());
        assert_eq!(containing_cylinder([0.5, 0.5], &seq, 0), Some(CylinderAddress::root()));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let sq = square_of(&"23".parse().unwrap(), &seq);
        let [x, y] = sq.lower_left();
        for _ in 0..100 {
            let p = [x + rng.random::<f64>() * sq.side, y + rng.random::<f64>() * sq.side];
            assert_eq!(containing_cylinder(p, &seq, 2).unwrap().to_string(), "23");
        }
    }

    #[test]
    fn boundary_points_belong_to_closed_square() {
        let seq = quarter();
        assert_eq!(containing_cylinder([0.25, 0.25], &seq, 1).unwrap().to_string(), "1");
        assert_eq!(containing_cylinder([0.75, 1.0], &seq, 1).unwrap().to_string(), "3");
    }

    fn seq_and_word() -> impl Strategy<Value = (Vec<f64>, Vec<u8>, Vec<u8>)> {
        (
            proptest::collection::vec(0.05f64..0.49, 1..4),
            proptest::collection::vec(1u8..=4, 0..5),
            proptest::collection::vec(1u8..=4, 0..5),
        )
    }

    proptest! {
        #[test]
        fn square_invariants((vals, w1, w2) in seq_and_word()) {
            let seq = ScaleSequence::periodic(vals).unwrap();
            let i = CylinderAddress::new(w1).unwrap();
            let j = CylinderAddress::new(w2).unwrap();
            let ij = i.concat(&j);
            let sq = square_of(&ij, &seq);
            prop_assert_eq!(sq.side, seq.sidelength(ij.generation()));
            if let Some(parent) = ij.parent() {
                prop_assert!(square_of(&parent, &seq).contains_square(&sq));
            }
            prop_assert_eq!(containing_cylinder(sq.center, &seq, ij.generation()), Some(ij));
        }

        #[test]
        fn children_are_disjoint(vals in proptest::collection::vec(0.05f64..0.499, 1..3), w in proptest::collection::vec(1u8..=4, 0..4)) {
            let seq = ScaleSequence::periodic(vals).unwrap();
            let a = CylinderAddress::new(w).unwrap();
            let g = CantorGeometry::new(&seq, a.generation() + 1);
            let kids: Vec<_> = (1..=4).map(|s| g.square_of(&a.child(s))).collect();
            for p in 0..4 {
                for q in (p + 1)..4 {
                    let gap_x = (kids[p].center[0] - kids[q].center[0]).abs() - kids[p].side;
                    let gap_y = (kids[p].center[1] - kids[q].center[1]).abs() - kids[p].side;
                    prop_assert!(gap_x > 0.0 || gap_y > 0.0);
                }
            }
        }
    }
}
