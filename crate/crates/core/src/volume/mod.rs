//! Regular 3D grids carrying fuzzy memberships, labels or scalar fields.
//!
//! Voxel values are stored x-fastest, then y, then z. The world position of
//! voxel `(i, j, k)` is `origin + (i, j, k) * spacing`, i.e. the origin is the
//! center of the first voxel.

pub(crate) mod edt;
mod morphology;

pub use edt::{distance_to_region, distance_transform};
pub use morphology::{dilate, dilate_bruteforce, dilate_crisp, erode_crisp, StructuringElement};

use crate::error::{Error, Result, Warned, Warning};
use crate::lattice::TruthDegree;

pub type Point3 = [f64; 3];

const GEOMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Geometry(format!("dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Geometry(format!(
                "spacing must be positive, got {spacing:?}"
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Geometry(format!("origin must be finite, got {origin:?}")));
        }
        dims[0]
            .checked_mul(dims[1])
            .and_then(|n| n.checked_mul(dims[2]))
            .ok_or_else(|| Error::Geometry(format!("dims {dims:?} overflow")))?;
        Ok(Geometry {
            dims,
            spacing,
            origin,
        })
    }

    /// Unit spacing, origin at zero.
    pub fn unit(dims: [usize; 3]) -> Result<Self> {
        Geometry::new(dims, [1.0; 3], [0.0; 3])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    /// Index of signed voxel coordinates, `None` outside the grid.
    #[inline]
    pub fn checked_index(&self, c: [isize; 3]) -> Option<usize> {
        if c[0] < 0 || c[1] < 0 || c[2] < 0 {
            return None;
        }
        let (x, y, z) = (c[0] as usize, c[1] as usize, c[2] as usize);
        if x >= self.dims[0] || y >= self.dims[1] || z >= self.dims[2] {
            return None;
        }
        Some(self.index(x, y, z))
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    #[inline]
    pub fn world(&self, c: [usize; 3]) -> Point3 {
        [
            self.origin[0] + c[0] as f64 * self.spacing[0],
            self.origin[1] + c[1] as f64 * self.spacing[1],
            self.origin[2] + c[2] as f64 * self.spacing[2],
        ]
    }

    #[inline]
    pub fn world_of_index(&self, idx: usize) -> Point3 {
        self.world(self.coords(idx))
    }

    /// Continuous voxel coordinates of a world point.
    #[inline]
    pub fn continuous_index(&self, p: Point3) -> Point3 {
        [
            (p[0] - self.origin[0]) / self.spacing[0],
            (p[1] - self.origin[1]) / self.spacing[1],
            (p[2] - self.origin[2]) / self.spacing[2],
        ]
    }

    pub fn same_spacing(&self, other: &Geometry) -> bool {
        self.spacing
            .iter()
            .zip(other.spacing.iter())
            .all(|(a, b)| (a - b).abs() <= GEOMETRY_TOL)
    }

    pub fn matches(&self, other: &Geometry) -> bool {
        self.dims == other.dims
            && self.same_spacing(other)
            && self
                .origin
                .iter()
                .zip(other.origin.iter())
                .all(|(a, b)| (a - b).abs() <= GEOMETRY_TOL)
    }

    pub(crate) fn ensure_matches(&self, other: &Geometry) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "dims {:?} spacing {:?} origin {:?} vs dims {:?} spacing {:?} origin {:?}",
                self.dims, self.spacing, self.origin, other.dims, other.spacing, other.origin
            )))
        }
    }

    /// Minimum and maximum world coordinates of voxel centers.
    pub fn bounds(&self) -> (Point3, Point3) {
        let hi = self.world([self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1]);
        (self.origin, hi)
    }
}

/// A fuzzy subset of the grid: memberships in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyVolume {
    geometry: Geometry,
    values: Vec<f64>,
}

impl FuzzyVolume {
    pub fn new(geometry: Geometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::Geometry(format!(
                "expected {} values, got {}",
                geometry.len(),
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidArgument(format!(
                "membership {v} at voxel {i} outside [0, 1]"
            )));
        }
        Ok(FuzzyVolume { geometry, values })
    }

    pub fn zeros(geometry: Geometry) -> Self {
        let n = geometry.len();
        FuzzyVolume {
            geometry,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(geometry: Geometry, mut f: impl FnMut([usize; 3]) -> f64) -> Result<Self> {
        let values = (0..geometry.len()).map(|i| f(geometry.coords(i))).collect();
        FuzzyVolume::new(geometry, values)
    }

    /// Wraps values already known to lie in `[0, 1]`.
    pub(crate) fn from_raw(geometry: Geometry, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), geometry.len());
        debug_assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
        FuzzyVolume { geometry, values }
    }

    #[inline]
    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.geometry.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::DegreeOutOfRange(value));
        }
        let i = self.geometry.index(x, y, z);
        self.values[i] = value;
        Ok(())
    }

    pub fn is_crisp(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn support_len(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Crisp mask of voxels with membership `>= threshold`.
    pub fn binarize(&self, threshold: f64) -> FuzzyVolume {
        let values = self
            .values
            .iter()
            .map(|&v| if v >= threshold { 1.0 } else { 0.0 })
            .collect();
        FuzzyVolume::from_raw(self.geometry.clone(), values)
    }

    /// Membership-weighted centroid in world coordinates.
    pub fn centroid(&self) -> Option<Point3> {
        let mut acc = [0.0; 3];
        let mut mass = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > 0.0 {
                let p = self.geometry.world_of_index(i);
                for a in 0..3 {
                    acc[a] += v * p[a];
                }
                mass += v;
            }
        }
        (mass > 0.0).then(|| [acc[0] / mass, acc[1] / mass, acc[2] / mass])
    }

    pub(crate) fn ensure_crisp(&self, what: &str) -> Result<()> {
        if self.is_crisp() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("{what} requires a crisp mask")))
        }
    }
}

/// Voxelwise minimum.
pub fn pointwise_min(a: &FuzzyVolume, b: &FuzzyVolume) -> Result<FuzzyVolume> {
    zip_with(a, b, f64::min)
}

/// Voxelwise maximum.
pub fn pointwise_max(a: &FuzzyVolume, b: &FuzzyVolume) -> Result<FuzzyVolume> {
    zip_with(a, b, f64::max)
}

/// Voxelwise product.
pub fn pointwise_product(a: &FuzzyVolume, b: &FuzzyVolume) -> Result<FuzzyVolume> {
    zip_with(a, b, |x, y| x * y)
}

pub fn complement(v: &FuzzyVolume) -> FuzzyVolume {
    let values = v.values.iter().map(|&x| 1.0 - x).collect();
    FuzzyVolume::from_raw(v.geometry.clone(), values)
}

fn zip_with(a: &FuzzyVolume, b: &FuzzyVolume, f: impl Fn(f64, f64) -> f64) -> Result<FuzzyVolume> {
    a.geometry.ensure_matches(&b.geometry)?;
    let values = a
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Ok(FuzzyVolume::from_raw(a.geometry.clone(), values))
}

/// Trilinear interpolation between voxel centers. Points outside the
/// bounding box of voxel centers sample to 0.
pub fn sample_trilinear(v: &FuzzyVolume, p: Point3) -> TruthDegree {
    TruthDegree::saturating(sample_raw(&v.geometry, &v.values, p))
}

pub(crate) fn sample_raw(g: &Geometry, values: &[f64], p: Point3) -> f64 {
    const EDGE_TOL: f64 = 1e-9;
    let u = g.continuous_index(p);
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..3 {
        let n = g.dims[a];
        let ua = u[a];
        if !ua.is_finite() || ua < -EDGE_TOL || ua > (n - 1) as f64 + EDGE_TOL {
            return 0.0;
        }
        if n == 1 {
            base[a] = 0;
            frac[a] = 0.0;
            continue;
        }
        let ua = ua.clamp(0.0, (n - 1) as f64);
        let i0 = (ua.floor() as usize).min(n - 2);
        base[a] = i0;
        frac[a] = ua - i0 as f64;
    }
    let mut acc = 0.0;
    for corner in 0..8usize {
        let mut w = 1.0;
        let mut c = [0usize; 3];
        for a in 0..3 {
            let hi = (corner >> a) & 1 == 1;
            if hi {
                if frac[a] == 0.0 {
                    w = 0.0;
                    break;
                }
                c[a] = base[a] + 1;
                w *= frac[a];
            } else {
                c[a] = base[a];
                w *= 1.0 - frac[a];
            }
        }
        if w != 0.0 {
            acc += w * values[g.index(c[0], c[1], c[2])];
        }
    }
    acc
}

/// Segmentation labels on a grid; 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    geometry: Geometry,
    labels: Vec<u32>,
}

impl LabelVolume {
    pub fn new(geometry: Geometry, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != geometry.len() {
            return Err(Error::Geometry(format!(
                "expected {} labels, got {}",
                geometry.len(),
                labels.len()
            )));
        }
        Ok(LabelVolume { geometry, labels })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn count(&self, label: u32) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// Crisp indicator of `label`. An absent label yields an all-zero volume
/// together with a warning.
pub fn from_label(lv: &LabelVolume, label: u32) -> Result<Warned<FuzzyVolume>> {
    if label == 0 {
        return Err(Error::InvalidArgument("label must be >= 1".into()));
    }
    let values: Vec<f64> = lv
        .labels
        .iter()
        .map(|&l| if l == label { 1.0 } else { 0.0 })
        .collect();
    let present = values.iter().any(|&v| v > 0.0);
    let vol = FuzzyVolume::from_raw(lv.geometry.clone(), values);
    Ok(if present {
        Warned::ok(vol)
    } else {
        Warned::warn(vol, Warning::LabelAbsent(label))
    })
}

/// Unbounded real values (distances in mm) on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    geometry: Geometry,
    values: Vec<f64>,
}

impl ScalarField {
    pub(crate) fn from_raw(geometry: Geometry, values: Vec<f64>) -> Self {
        ScalarField { geometry, values }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.geometry.index(x, y, z)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(d: [usize; 3]) -> Geometry {
        Geometry::unit(d).unwrap()
    }

    #[test]
    fn geometry_validation() {
        assert!(Geometry::new([0, 1, 1], [1.0; 3], [0.0; 3]).is_err());
        assert!(Geometry::new([1, 1, 1], [1.0, 0.0, 1.0], [0.0; 3]).is_err());
        let g = Geometry::new([3, 4, 5], [1.0, 2.0, 0.5], [1.0, 0.0, -1.0]).unwrap();
        assert_eq!(g.len(), 60);
        let idx = g.index(2, 3, 4);
        assert_eq!(g.coords(idx), [2, 3, 4]);
        assert_eq!(g.world([2, 3, 4]), [3.0, 6.0, 1.0]);
    }

    #[test]
    fn fuzzy_volume_rejects_bad_values() {
        assert!(FuzzyVolume::new(geom([2, 1, 1]), vec![0.0, 1.5]).is_err());
        assert!(FuzzyVolume::new(geom([2, 1, 1]), vec![0.0]).is_err());
    }

    #[test]
    fn from_label_examples() {
        let g = geom([3, 3, 3]);
        let mut labels = vec![0u32; 27];
        labels[13] = 3;
        let lv = LabelVolume::new(g, labels).unwrap();
        let hit = from_label(&lv, 3).unwrap();
        assert!(hit.warning.is_none());
        assert_eq!(hit.value.values()[13], 1.0);
        assert_eq!(hit.value.support_len(), 1);
        let miss = from_label(&lv, 7).unwrap();
        assert_eq!(miss.warning, Some(Warning::LabelAbsent(7)));
        assert_eq!(miss.value.support_len(), 0);
        assert!(from_label(&lv, 0).is_err());
    }

    #[test]
    fn pointwise_identities() {
        let g = geom([4, 3, 2]);
        let v = FuzzyVolume::from_fn(g, |[x, y, z]| ((x + 2 * y + 3 * z) % 7) as f64 / 6.0).unwrap();
        assert_eq!(pointwise_min(&v, &v).unwrap(), v);
        let cc = complement(&complement(&v));
        for (a, b) in cc.values().iter().zip(v.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        let kleene = pointwise_max(&v, &complement(&v)).unwrap();
        assert!(kleene.values().iter().all(|&x| x >= 0.5));
        let other = FuzzyVolume::zeros(geom([4, 3, 3]));
        assert!(pointwise_min(&v, &other).is_err());
    }

    #[test]
    fn trilinear_examples() {
        let g = Geometry::new([2, 2, 2], [2.0; 3], [10.0, 0.0, 0.0]).unwrap();
        let mut v = FuzzyVolume::zeros(g);
        v.set(1, 0, 0, 1.0).unwrap();
        v.set(0, 1, 1, 0.25).unwrap();
        assert_eq!(sample_trilinear(&v, [12.0, 0.0, 0.0]).value(), 1.0);
        assert_eq!(sample_trilinear(&v, [10.0, 2.0, 2.0]).value(), 0.25);
        assert_eq!(sample_trilinear(&v, [11.0, 0.0, 0.0]).value(), 0.5);
        assert_eq!(sample_trilinear(&v, [9.0, 0.0, 0.0]).value(), 0.0);
        assert_eq!(sample_trilinear(&v, [11.0, 0.0, 2.5]).value(), 0.0);
    }

    #[test]
    fn trilinear_on_flat_axis() {
        let g = geom([3, 3, 1]);
        let v = FuzzyVolume::from_fn(g, |[x, _, _]| x as f64 / 2.0).unwrap();
        assert!((sample_trilinear(&v, [1.5, 1.0, 0.0]).value() - 0.75).abs() < 1e-12);
        assert_eq!(sample_trilinear(&v, [1.5, 1.0, 0.5]).value(), 0.0);
    }

    #[test]
    fn centroid_weighted() {
        let g = geom([3, 1, 1]);
        let v = FuzzyVolume::new(g, vec![1.0, 0.0, 0.5]).unwrap();
        let c = v.centroid().unwrap();
        assert!((c[0] - 1.0 / 1.5).abs() < 1e-12);
        assert!(FuzzyVolume::zeros(geom([2, 2, 2])).centroid().is_none());
    }
}
