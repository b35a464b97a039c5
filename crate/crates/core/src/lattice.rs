//! Finite centered windows of Z^d: sites, boxes, boundary bonds and the
//! position observable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice site. Coordinates beyond the lattice dimension are zero.
pub type Site = [i64; 3];

pub const MAX_DIMENSION: usize = 3;

/// A centered hypercubic window `{-h, ..., h}^d` with `extent = 2h + 1`.
///
/// Sites are indexed row-major with axis 0 slowest, so the largest index
/// offset between nearest neighbours is `extent^(d-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    dimension: usize,
    extent: usize,
}

impl LatticeSpec {
    pub fn new(dimension: usize, extent: usize) -> Result<Self> {
        if dimension == 0 || dimension > MAX_DIMENSION {
            return Err(Error::Lattice(format!(
                "dimension must be 1..={MAX_DIMENSION}, got {dimension}"
            )));
        }
        if extent % 2 == 0 {
            return Err(Error::Lattice(format!(
                "extent must be odd so the window is centered at the origin, got {extent}"
            )));
        }
        if extent.checked_pow(dimension as u32).is_none() {
            return Err(Error::Lattice("site count overflows".into()));
        }
        Ok(Self { dimension, extent })
    }

    pub fn chain(extent: usize) -> Result<Self> {
        Self::new(1, extent)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn extent(&self) -> usize {
        self.extent
    }

    /// Largest coordinate magnitude `h`.
    pub fn half_extent(&self) -> i64 {
        (self.extent / 2) as i64
    }

    pub fn num_sites(&self) -> usize {
        self.extent.pow(self.dimension as u32)
    }

    /// Index offset of a unit step along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.extent.pow((self.dimension - 1 - axis) as u32)
    }

    pub fn contains(&self, site: &Site) -> bool {
        let h = self.half_extent();
        (0..self.dimension).all(|j| site[j].abs() <= h)
            && (self.dimension..MAX_DIMENSION).all(|j| site[j] == 0)
    }

    pub fn index_of(&self, site: &Site) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        let h = self.half_extent();
        let mut idx = 0usize;
        for j in 0..self.dimension {
            idx = idx * self.extent + (site[j] + h) as usize;
        }
        Some(idx)
    }

    pub fn site_of(&self, index: usize) -> Site {
        assert!(index < self.num_sites(), "site index {index} out of range");
        let h = self.half_extent();
        let mut site = [0i64; 3];
        let mut rest = index;
        for j in (0..self.dimension).rev() {
            site[j] = (rest % self.extent) as i64 - h;
            rest /= self.extent;
        }
        site
    }

    pub fn origin_index(&self) -> usize {
        self.index_of(&[0, 0, 0]).expect("origin is always a site")
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.num_sites()).map(move |i| self.site_of(i))
    }

    /// Nearest neighbours of `site` that lie inside the window.
    pub fn neighbors(&self, site: &Site) -> Vec<Site> {
        let mut out = Vec::with_capacity(2 * self.dimension);
        for j in 0..self.dimension {
            for step in [-1i64, 1] {
                let mut n = *site;
                n[j] += step;
                if self.contains(&n) {
                    out.push(n);
                }
            }
        }
        out
    }

    /// All nearest-neighbour bonds `(i, j)` with `i < j` in index order.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.num_sites() {
            let s = self.site_of(i);
            for j in 0..self.dimension {
                let mut n = s;
                n[j] += 1;
                if let Some(k) = self.index_of(&n) {
                    out.push((i, k));
                }
            }
        }
        out
    }

    /// Distance from `site` to the outermost layer, in the sup norm.
    pub fn depth(&self, site: &Site) -> i64 {
        self.half_extent() - sup_norm(site)
    }
}

pub fn sup_norm(site: &Site) -> i64 {
    site.iter().map(|c| c.abs()).max().unwrap_or(0)
}

pub fn sup_distance(a: &Site, b: &Site) -> i64 {
    (0..MAX_DIMENSION)
        .map(|j| (a[j] - b[j]).abs())
        .max()
        .unwrap_or(0)
}

fn l1_distance(a: &Site, b: &Site) -> i64 {
    (0..MAX_DIMENSION).map(|j| (a[j] - b[j]).abs()).sum()
}

/// The cube `Λ_L(q) = {x : ‖x − q‖_∞ ≤ L}` with a real radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeBox {
    pub center: Site,
    pub radius: f64,
}

impl LatticeBox {
    pub fn new(center: Site, radius: f64) -> Self {
        Self { center, radius }
    }

    /// Integer half-width `⌊L⌋`; membership only depends on it.
    pub fn int_radius(&self) -> i64 {
        self.radius.floor() as i64
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.radius >= 0.0 && (sup_distance(site, &self.center) as f64) <= self.radius
    }

    /// Number of sites in the box when it is fully inside the lattice.
    pub fn full_site_count(&self, dimension: usize) -> usize {
        if self.radius < 0.0 {
            return 0;
        }
        ((2 * self.int_radius() + 1) as usize).pow(dimension as u32)
    }

    /// Box sites present in the lattice, in lattice index order.
    pub fn sites(&self, lattice: &LatticeSpec) -> Vec<Site> {
        self.indices(lattice)
            .into_iter()
            .map(|i| lattice.site_of(i))
            .collect()
    }

    /// Lattice indices of box sites, ascending.
    pub fn indices(&self, lattice: &LatticeSpec) -> Vec<usize> {
        if self.radius < 0.0 {
            return Vec::new();
        }
        let r = self.int_radius();
        let d = lattice.dimension();
        let mut out = Vec::new();
        let mut offset = [-r; 3];
        for j in d..MAX_DIMENSION {
            offset[j] = 0;
        }
        loop {
            let mut s = self.center;
            for j in 0..d {
                s[j] += offset[j];
            }
            if let Some(i) = lattice.index_of(&s) {
                out.push(i);
            }
            // odometer over offsets, last axis fastest
            let mut j = d;
            loop {
                if j == 0 {
                    out.sort_unstable();
                    return out;
                }
                j -= 1;
                if offset[j] < r {
                    offset[j] += 1;
                    break;
                }
                offset[j] = -r;
            }
        }
    }

    /// True when the box and a one-site exterior layer fit in the lattice.
    pub fn has_exterior_layer(&self, lattice: &LatticeSpec) -> bool {
        let reach = self.int_radius() + 1;
        lattice.contains(&self.center)
            && (0..lattice.dimension())
                .all(|j| self.center[j].abs() + reach <= lattice.half_extent())
    }

    pub fn fits_in(&self, lattice: &LatticeSpec) -> bool {
        let r = self.int_radius();
        lattice.contains(&self.center)
            && (0..lattice.dimension()).all(|j| self.center[j].abs() + r <= lattice.half_extent())
    }
}

/// Axis-aligned block `{x : lower_j ≤ x_j ≤ upper_j}`; side lengths may be even.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cuboid {
    pub lower: Site,
    pub upper: Site,
}

impl Cuboid {
    pub fn new(lower: Site, upper: Site) -> Result<Self> {
        if (0..MAX_DIMENSION).any(|j| lower[j] > upper[j]) {
            return Err(Error::Geometry(format!("empty cuboid {lower:?}..{upper:?}")));
        }
        Ok(Self { lower, upper })
    }

    /// `count` consecutive sites along the first axis starting at `start`.
    pub fn interval(start: i64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Geometry("empty interval".into()));
        }
        Self::new([start, 0, 0], [start + count as i64 - 1, 0, 0])
    }

    pub fn contains(&self, site: &Site) -> bool {
        (0..MAX_DIMENSION).all(|j| self.lower[j] <= site[j] && site[j] <= self.upper[j])
    }

    pub fn site_count(&self, dimension: usize) -> usize {
        (0..dimension)
            .map(|j| (self.upper[j] - self.lower[j] + 1) as usize)
            .product()
    }

    pub fn fits_in(&self, lattice: &LatticeSpec) -> bool {
        lattice.contains(&self.lower) && lattice.contains(&self.upper)
    }

    /// Lattice indices of the cuboid sites, ascending.
    pub fn indices(&self, lattice: &LatticeSpec) -> Vec<usize> {
        let mut out: Vec<usize> = (0..lattice.num_sites())
            .filter(|&i| self.contains(&lattice.site_of(i)))
            .collect();
        out.sort_unstable();
        out
    }

    /// Number of lattice sites strictly between the two blocks along the
    /// sup-distance, or `None` when they overlap.
    pub fn gap(&self, other: &Cuboid) -> Option<i64> {
        let dist = (0..MAX_DIMENSION)
            .map(|j| {
                (other.lower[j] - self.upper[j])
                    .max(self.lower[j] - other.upper[j])
                    .max(0)
            })
            .max()
            .unwrap_or(0);
        (dist > 0).then(|| dist - 1)
    }
}

/// The coordinate projector `1_q`.
///
/// On Z^d the indicator of `‖x − q‖_∞ < 1` selects exactly `x = q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiteIndicator {
    pub site: Site,
}

impl SiteIndicator {
    pub fn new(site: Site) -> Self {
        Self { site }
    }

    pub fn value_at(&self, x: &Site) -> f64 {
        if sup_distance(x, &self.site) < 1 {
            1.0
        } else {
            0.0
        }
    }

    /// Unit vector `δ_q` in the lattice basis.
    pub fn vector(&self, lattice: &LatticeSpec) -> Result<Vec<f64>> {
        let idx = lattice
            .index_of(&self.site)
            .ok_or_else(|| Error::Geometry(format!("site {:?} outside lattice", self.site)))?;
        let mut v = vec![0.0; lattice.num_sites()];
        v[idx] = 1.0;
        Ok(v)
    }
}

/// Bonds crossing the surface of a box: `u` inside, `u′` outside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryPairSet {
    pub pairs: Vec<(Site, Site)>,
}

impl BoundaryPairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Distinct exterior endpoints `u′`, in pair order.
    pub fn exterior_sites(&self) -> Vec<Site> {
        let mut out: Vec<Site> = Vec::new();
        for (_, v) in &self.pairs {
            if !out.contains(v) {
                out.push(*v);
            }
        }
        out.sort();
        out
    }
}

/// Nearest-neighbour bonds with exactly one endpoint in `bx`, ordered
/// lexicographically by inner then outer site.
pub fn boundary_pairs(bx: &LatticeBox, lattice: &LatticeSpec) -> Result<BoundaryPairSet> {
    if bx.radius < 0.0 {
        return Err(Error::Geometry("box radius must be nonnegative".into()));
    }
    if !bx.has_exterior_layer(lattice) {
        return Err(Error::Geometry(format!(
            "box of radius {} at {:?} has no exterior site layer inside a lattice of extent {}",
            bx.radius,
            &bx.center[..lattice.dimension()],
            lattice.extent()
        )));
    }
    let mut pairs = Vec::new();
    for u in bx.sites(lattice) {
        for v in lattice.neighbors(&u) {
            if !bx.contains(&v) {
                debug_assert_eq!(sup_distance(&u, &v), 1);
                debug_assert_eq!(l1_distance(&u, &v), 1);
                pairs.push((u, v));
            }
        }
    }
    pairs.sort();
    Ok(BoundaryPairSet { pairs })
}

/// `|x|² = Σ_j x_j²` for every lattice site, in index order.
pub fn position_second_moment_weights(lattice: &LatticeSpec) -> Vec<f64> {
    lattice
        .sites()
        .map(|s| s.iter().map(|&c| (c * c) as f64).sum())
        .collect()
}

/// Coordinate `x_j` for every site.
pub fn axis_coordinates(lattice: &LatticeSpec, axis: usize) -> Vec<f64> {
    lattice.sites().map(|s| s[axis] as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn chain_box_has_two_boundary_bonds() {
        let lat = LatticeSpec::chain(11).unwrap();
        let bx = LatticeBox::new([0, 0, 0], 2.0);
        let set = boundary_pairs(&bx, &lat).unwrap();
        assert_eq!(set.pairs, vec![([-2, 0, 0], [-3, 0, 0]), ([2, 0, 0], [3, 0, 0])]);
    }

    #[test]
    fn square_box_boundary_matches_brute_force() {
        let lat = LatticeSpec::new(2, 7).unwrap();
        let bx = LatticeBox::new([0, 0, 0], 1.0);
        let set = boundary_pairs(&bx, &lat).unwrap();
        // brute force over every bond of the lattice
        let mut crossing = 0;
        for (a, b) in lat.bonds() {
            let (sa, sb) = (lat.site_of(a), lat.site_of(b));
            if bx.contains(&sa) != bx.contains(&sb) {
                crossing += 1;
            }
        }
        assert_eq!(crossing, 12);
        assert_eq!(set.len(), 12);
    }

    #[test]
    fn box_touching_lattice_edge_is_rejected() {
        let lat = LatticeSpec::chain(11).unwrap();
        let err = boundary_pairs(&LatticeBox::new([0, 0, 0], 5.0), &lat).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }

    #[test]
    fn even_extent_rejected() {
        assert!(LatticeSpec::chain(10).is_err());
        assert!(LatticeSpec::new(4, 3).is_err());
    }

    #[test]
    fn second_moment_weights() {
        let lat1 = LatticeSpec::chain(7).unwrap();
        let w1 = position_second_moment_weights(&lat1);
        assert_eq!(w1[lat1.index_of(&[3, 0, 0]).unwrap()], 9.0);
        assert_eq!(w1[lat1.origin_index()], 0.0);

        let lat2 = LatticeSpec::new(2, 7).unwrap();
        let w2 = position_second_moment_weights(&lat2);
        assert_eq!(w2[lat2.index_of(&[1, -2, 0]).unwrap()], 5.0);

        let bx = LatticeBox::new([0, 0, 0], 1.0);
        let sum: f64 = bx.indices(&lat2).iter().map(|&i| w2[i]).sum();
        assert_eq!(sum, 12.0);
    }

    #[test]
    fn real_radius_membership() {
        let bx = LatticeBox::new([0, 0, 0], 5.196);
        assert!(bx.contains(&[5, 0, 0]));
        assert!(!bx.contains(&[6, 0, 0]));
        assert_eq!(bx.full_site_count(2), 121);
    }

    #[test]
    fn indicator_selects_single_site() {
        let ind = SiteIndicator::new([1, -1, 0]);
        assert_eq!(ind.value_at(&[1, -1, 0]), 1.0);
        assert_eq!(ind.value_at(&[1, 0, 0]), 0.0);
    }

    proptest! {
        #[test]
        fn indexing_is_bijective(d in 1usize..=3, half in 0usize..5) {
            let lat = LatticeSpec::new(d, 2 * half + 1).unwrap();
            for i in 0..lat.num_sites() {
                prop_assert_eq!(lat.index_of(&lat.site_of(i)), Some(i));
            }
        }

        #[test]
        fn boundary_pairs_partition_crossing_bonds(
            d in 1usize..=2, cx in -2i64..=2, cy in -2i64..=2, r in 0.0f64..2.9
        ) {
            let lat = LatticeSpec::new(d, 13).unwrap();
            let mut center = [cx, cy, 0];
            if d == 1 { center[1] = 0; }
            let bx = LatticeBox::new(center, r);
            let set = boundary_pairs(&bx, &lat).unwrap();
            let mut expected = Vec::new();
            for (a, b) in lat.bonds() {
                let (sa, sb) = (lat.site_of(a), lat.site_of(b));
                match (bx.contains(&sa), bx.contains(&sb)) {
                    (true, false) => expected.push((sa, sb)),
                    (false, true) => expected.push((sb, sa)),
                    _ => {}
                }
            }
            expected.sort();
            prop_assert_eq!(&set.pairs, &expected);
            let surface = bx.full_site_count(d) - if bx.int_radius() > 0 {
                ((2 * bx.int_radius() - 1) as usize).pow(d as u32)
            } else { 0 };
            prop_assert!(set.len() <= 2 * d * surface);
        }

        #[test]
        fn box_membership_reflection_symmetric(
            cx in -3i64..3, x in -6i64..6, y in -6i64..6, r in 0.0f64..4.0
        ) {
            let bx = LatticeBox::new([cx, 0, 0], r);
            let p = [x, y, 0];
            let refl = [2 * cx - x, -y, 0];
            prop_assert_eq!(bx.contains(&p), bx.contains(&refl));
        }

        #[test]
        fn weights_invariant_under_signed_permutations(
            a in -4i64..=4, b in -4i64..=4, c in -4i64..=4, flip in 0u8..8
        ) {
            let lat = LatticeSpec::new(3, 9).unwrap();
            let w = position_second_moment_weights(&lat);
            let s = [a, b, c];
            let sign = |k: u8, v: i64| if flip & (1 << k) != 0 { -v } else { v };
            let t = [sign(0, c), sign(1, a), sign(2, b)];
            prop_assert_eq!(w[lat.index_of(&s).unwrap()], w[lat.index_of(&t).unwrap()]);
        }
    }
}
