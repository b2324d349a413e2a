//! Fuzzy landscapes and satisfaction degrees for spatial relations.
//!
//! A landscape is a [`FuzzyVolume`] whose value at a voxel is the degree to
//! which that voxel satisfies a relation with respect to a reference region.
//! Directional relations dilate the reference by a fuzzy cone; crossing is
//! graded by the distance to the rim of the object's loop; distance
//! relations ramp over a band around the reference.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result, Warned, Warning};
use crate::lattice::{TNorm, TruthDegree};
use crate::volume::edt::squared_edt_to_background;
use crate::volume::{
    dilate_crisp, distance_to_region, erode_crisp, sample_trilinear, FuzzyVolume, Point3,
};

const UNIT_TOL: f64 = 1e-9;

/// A fuzzy cone: axis direction in world coordinates and half-angle aperture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionSpec {
    vector: Point3,
    aperture: f64,
}

impl DirectionSpec {
    pub fn new(vector: Point3, aperture: f64) -> Result<Self> {
        let n = norm(vector);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidArgument(format!(
                "direction {vector:?} is not a unit vector (norm {n})"
            )));
        }
        if !(aperture > 0.0 && aperture <= PI) {
            return Err(Error::InvalidArgument(format!(
                "aperture {aperture} outside (0, pi]"
            )));
        }
        Ok(DirectionSpec { vector, aperture })
    }

    /// Normalizes `vector` first.
    pub fn towards(vector: Point3, aperture: f64) -> Result<Self> {
        let n = norm(vector);
        if !(n > 0.0) {
            return Err(Error::InvalidArgument("zero direction vector".into()));
        }
        DirectionSpec::new(scale(vector, 1.0 / n), aperture)
    }

    pub fn vector(&self) -> Point3 {
        self.vector
    }

    pub fn aperture(&self) -> f64 {
        self.aperture
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Aggregation {
    #[default]
    Sup,
    Mean,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sup" | "max" => Ok(Aggregation::Sup),
            "mean" | "avg" => Ok(Aggregation::Mean),
            other => Err(Error::InvalidArgument(format!("unknown aggregation '{other}'"))),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Sup => "sup",
            Aggregation::Mean => "mean",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationParams {
    /// Width (mm) of the band inside a reference object that stays in its
    /// own directional landscape. 0 disables interior removal.
    pub contour_margin_mm: f64,
    pub aggregation: Aggregation,
    pub closing_radius_mm: f64,
    pub near_band_mm: (f64, f64),
}

impl Default for RelationParams {
    fn default() -> Self {
        RelationParams {
            contour_margin_mm: 2.0,
            aggregation: Aggregation::Sup,
            closing_radius_mm: 10.0,
            near_band_mm: (2.0, 10.0),
        }
    }
}

impl RelationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.contour_margin_mm >= 0.0) {
            return Err(Error::InvalidArgument("contour margin must be >= 0".into()));
        }
        if !(self.closing_radius_mm > 0.0) {
            return Err(Error::InvalidArgument("closing radius must be > 0".into()));
        }
        let (inner, outer) = self.near_band_mm;
        if !(inner >= 0.0 && inner < outer) {
            return Err(Error::InvalidArgument(format!(
                "near band ({inner}, {outer}) must satisfy 0 <= inner < outer"
            )));
        }
        Ok(())
    }
}

/// "About n": membership 1 at `modal`, falling linearly to 0 at `modal ± halfwidth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangularQuantifier {
    modal: f64,
    halfwidth: f64,
}

impl TriangularQuantifier {
    pub fn new(modal: f64, halfwidth: f64) -> Result<Self> {
        if !(modal >= 0.0 && modal.is_finite()) {
            return Err(Error::InvalidArgument(format!("modal value {modal} must be >= 0")));
        }
        if !(halfwidth > 0.0 && halfwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!("halfwidth {halfwidth} must be > 0")));
        }
        Ok(TriangularQuantifier { modal, halfwidth })
    }

    pub fn modal(&self) -> f64 {
        self.modal
    }

    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }
}

pub fn quantifier_degree(q: &TriangularQuantifier, count: f64) -> TruthDegree {
    TruthDegree::saturating(1.0 - (count - q.modal).abs() / q.halfwidth)
}

/// Cone membership `max(0, 1 - angle / aperture)`; 0 for a zero offset.
pub fn cone_membership(offset: Point3, d: &DirectionSpec) -> TruthDegree {
    TruthDegree::saturating(cone_raw(offset, d.vector, d.aperture))
}

#[inline]
fn cone_raw(offset: Point3, axis: Point3, aperture: f64) -> f64 {
    let n2 = dot(offset, offset);
    if n2 == 0.0 {
        return 0.0;
    }
    cone_from_cos(dot(offset, axis) / n2.sqrt(), aperture)
}

#[inline]
fn cone_from_cos(c: f64, aperture: f64) -> f64 {
    let theta = c.clamp(-1.0, 1.0).acos();
    (1.0 - theta / aperture).max(0.0)
}

/// How each source voxel orients its cone.
#[derive(Debug, Clone, Copy)]
enum ConeAxis {
    Fixed(Point3),
    /// Points along ±`axis` towards the plane `p[axis_index] = coord`.
    TowardPlane { axis: Point3, axis_index: usize, coord: f64 },
}

impl ConeAxis {
    #[inline]
    fn at(&self, p: Point3) -> Option<Point3> {
        match *self {
            ConeAxis::Fixed(v) => Some(v),
            ConeAxis::TowardPlane {
                axis,
                axis_index,
                coord,
            } => {
                let delta = coord - p[axis_index];
                if delta == 0.0 {
                    None
                } else {
                    // `axis` has a ±1 component at `axis_index`.
                    let sign = delta.signum() * axis[axis_index].signum();
                    Some(scale(axis, sign))
                }
            }
        }
    }
}

/// Source voxels sharing one membership value and one cone axis.
struct SourceGroup {
    axis: Point3,
    value: f64,
    points: Vec<Point3>,
}

/// `sup_k' C(cone(world(k) - world(k')), region(k'))` over the support.
///
/// The cone profile falls monotonically with the angle, so within a group only the source
/// seen at the smallest angle matters and `acos` runs once per group and target.
fn cone_dilation(region: &FuzzyVolume, cone: ConeAxis, aperture: f64, t: TNorm) -> Vec<f64> {
    let g = region.geometry();
    let mut groups: Vec<SourceGroup> = Vec::new();
    for (i, &v) in region.values().iter().enumerate() {
        if v <= 0.0 {
            continue;
        }
        let p = g.world_of_index(i);
        let Some(axis) = cone.at(p) else { continue };
        match groups.iter_mut().find(|gr| gr.value == v && gr.axis == axis) {
            Some(gr) => gr.points.push(p),
            None => groups.push(SourceGroup {
                axis,
                value: v,
                points: vec![p],
            }),
        }
    }
    groups.sort_by(|a, b| b.value.total_cmp(&a.value));
    // Beyond a right angle every cone value is 0 when the aperture is at most a right angle.
    let front_only = aperture <= PI / 2.0;
    let [nx, ny, _] = g.dims;
    let mut out = vec![0.0; g.len()];
    if groups.is_empty() {
        return out;
    }
    out.par_chunks_mut(nx * ny).enumerate().for_each(|(z, slab)| {
        for y in 0..ny {
            for x in 0..nx {
                let p = g.world([x, y, z]);
                let mut best: f64 = 0.0;
                for gr in &groups {
                    if t.conj(1.0, gr.value) <= best {
                        continue;
                    }
                    let mut best_cos = f64::NEG_INFINITY;
                    for &s in &gr.points {
                        let off = sub(p, s);
                        let d = dot(off, gr.axis);
                        if front_only && d <= 0.0 {
                            continue;
                        }
                        let n2 = dot(off, off);
                        if n2 == 0.0 {
                            continue;
                        }
                        let c = d / n2.sqrt();
                        if c > best_cos {
                            best_cos = c;
                            if c >= 1.0 {
                                break;
                            }
                        }
                    }
                    if best_cos > f64::NEG_INFINITY {
                        best = best.max(t.conj(cone_from_cos(best_cos, aperture), gr.value));
                    }
                }
                slab[x + nx * y] = best;
            }
        }
    });
    out
}

/// Zeroes the landscape inside the reference object, except within
/// `margin_mm` of its contour.
fn remove_interior(values: &mut [f64], region: &FuzzyVolume, margin_mm: f64) -> Result<()> {
    if margin_mm <= 0.0 {
        return Ok(());
    }
    let core = erode_crisp(&region.binarize(0.5), margin_mm)?;
    for (v, &c) in values.iter_mut().zip(core.values()) {
        *v *= 1.0 - c;
    }
    Ok(())
}

fn empty_support(region: &FuzzyVolume) -> Warned<FuzzyVolume> {
    Warned::warn(
        FuzzyVolume::zeros(region.geometry().clone()),
        Warning::EmptySupport,
    )
}

/// Region located in direction `d` of `region`.
pub fn directional_landscape(
    region: &FuzzyVolume,
    d: &DirectionSpec,
    params: &RelationParams,
    t: TNorm,
) -> Result<Warned<FuzzyVolume>> {
    if region.support_len() == 0 {
        return Ok(empty_support(region));
    }
    let mut values = cone_dilation(region, ConeAxis::Fixed(d.vector), d.aperture, t);
    remove_interior(&mut values, region, params.contour_margin_mm)?;
    Ok(Warned::ok(FuzzyVolume::from_raw(region.geometry().clone(), values)))
}

/// Either side along `axis`: the maximum of the `+axis` and `-axis` landscapes.
pub fn bilateral_landscape(
    region: &FuzzyVolume,
    axis: Point3,
    aperture: f64,
    params: &RelationParams,
    t: TNorm,
) -> Result<Warned<FuzzyVolume>> {
    let plus = DirectionSpec::towards(axis, aperture)?;
    if region.support_len() == 0 {
        return Ok(empty_support(region));
    }
    let a = cone_dilation(region, ConeAxis::Fixed(plus.vector), aperture, t);
    let b = cone_dilation(region, ConeAxis::Fixed(scale(plus.vector, -1.0)), aperture, t);
    let mut values: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
    remove_interior(&mut values, region, params.contour_margin_mm)?;
    Ok(Warned::ok(FuzzyVolume::from_raw(region.geometry().clone(), values)))
}

/// Towards a midline plane: each source voxel's cone points along `axis`
/// (a world axis direction) toward the plane where that axis' coordinate
/// equals `midline`. Sources on the plane contribute nothing.
pub fn toward_plane_landscape(
    region: &FuzzyVolume,
    axis: Point3,
    midline: f64,
    aperture: f64,
    params: &RelationParams,
    t: TNorm,
) -> Result<Warned<FuzzyVolume>> {
    let spec = DirectionSpec::towards(axis, aperture)?;
    let axis_index = (0..3)
        .find(|&i| (spec.vector[i].abs() - 1.0).abs() <= UNIT_TOL)
        .ok_or_else(|| Error::InvalidArgument("midline axis must be a world axis".into()))?;
    if region.support_len() == 0 {
        return Ok(empty_support(region));
    }
    let cone = ConeAxis::TowardPlane {
        axis: spec.vector,
        axis_index,
        coord: midline,
    };
    let mut values = cone_dilation(region, cone, aperture, t);
    remove_interior(&mut values, region, params.contour_margin_mm)?;
    Ok(Warned::ok(FuzzyVolume::from_raw(region.geometry().clone(), values)))
}

/// Degree to which `target` lies in the landscape, aggregated per `params`.
pub fn directional_degree(
    landscape: &FuzzyVolume,
    target: &FuzzyVolume,
    params: &RelationParams,
    t: TNorm,
) -> Result<TruthDegree> {
    landscape.geometry().ensure_matches(target.geometry())?;
    let pairs = landscape.values().iter().zip(target.values());
    let v = match params.aggregation {
        Aggregation::Sup => pairs.map(|(&l, &x)| t.conj(l, x)).fold(0.0, f64::max),
        Aggregation::Mean => {
            let mass: f64 = target.values().iter().sum();
            if mass == 0.0 {
                0.0
            } else {
                pairs.map(|(&l, &x)| t.conj(l, x)).sum::<f64>() / mass
            }
        }
    };
    Ok(TruthDegree::saturating(v))
}

/// Interior of the object's loop: morphological closing minus the object.
pub fn hole_region(mask: &FuzzyVolume, closing_radius_mm: f64) -> Result<Warned<FuzzyVolume>> {
    mask.ensure_crisp("hole_region")?;
    if !(closing_radius_mm > 0.0) {
        return Err(Error::InvalidArgument("closing radius must be > 0".into()));
    }
    let closed = erode_crisp(&dilate_crisp(mask, closing_radius_mm)?, closing_radius_mm)?;
    let values: Vec<f64> = closed
        .values()
        .iter()
        .zip(mask.values())
        .map(|(&c, &m)| if c == 1.0 && m == 0.0 { 1.0 } else { 0.0 })
        .collect();
    let hole = FuzzyVolume::from_raw(mask.geometry().clone(), values);
    Ok(if hole.support_len() == 0 {
        Warned::warn(hole, Warning::NoLoopDetected { closing_radius_mm })
    } else {
        Warned::ok(hole)
    })
}

/// Crossing degree: 0 outside the loop interior, growing with the distance
/// to the loop's rim and normalized to 1 at its deepest point.
///
/// Depth is the distance to the object itself, so the peak sits where the loop is widest
/// rather than where the filled membrane happens to be thickest.
pub fn crossing_landscape(mask: &FuzzyVolume, params: &RelationParams) -> Result<Warned<FuzzyVolume>> {
    let hole = hole_region(mask, params.closing_radius_mm)?;
    let g = mask.geometry();
    if hole.value.support_len() == 0 {
        return Ok(Warned {
            value: FuzzyVolume::zeros(g.clone()),
            warning: hole.warning,
        });
    }
    let dist = distance_to_region(mask)?;
    let inside = |i: usize| hole.value.values()[i] == 1.0;
    let max = (0..g.len())
        .filter(|&i| inside(i))
        .map(|i| dist.values()[i])
        .fold(0.0, f64::max);
    let values = (0..g.len())
        .map(|i| if inside(i) { dist.values()[i] / max } else { 0.0 })
        .collect();
    Ok(Warned {
        value: FuzzyVolume::from_raw(g.clone(), values),
        warning: hole.warning,
    })
}

/// Crossing landscape from an explicit loop-interior mask: depth is measured to the mask's
/// own boundary.
pub fn crossing_from_hole(hole: &FuzzyVolume) -> Result<FuzzyVolume> {
    hole.ensure_crisp("crossing_from_hole")?;
    let g = hole.geometry();
    if hole.support_len() == 0 {
        return Ok(FuzzyVolume::zeros(g.clone()));
    }
    let dist: Vec<f64> = squared_edt_to_background(hole)
        .into_iter()
        .map(f64::sqrt)
        .collect();
    let max = dist.iter().copied().fold(0.0, f64::max);
    let values = dist
        .iter()
        .zip(hole.values())
        .map(|(&d, &h)| if h == 1.0 { d / max } else { 0.0 })
        .collect();
    Ok(FuzzyVolume::from_raw(g.clone(), values))
}

/// Region between `a` and `b`: opposed cone dilations along the centroid
/// axis, conjoined by min, outside both objects.
pub fn between_landscape(
    a: &FuzzyVolume,
    b: &FuzzyVolume,
    aperture: f64,
    t: TNorm,
) -> Result<FuzzyVolume> {
    a.geometry().ensure_matches(b.geometry())?;
    let ca = a
        .centroid()
        .ok_or_else(|| Error::InvalidArgument("between: first region is empty".into()))?;
    let cb = b
        .centroid()
        .ok_or_else(|| Error::InvalidArgument("between: second region is empty".into()))?;
    let axis = sub(cb, ca);
    let len = norm(axis);
    if len < UNIT_TOL {
        return Err(Error::InvalidArgument("between: coincident centroids".into()));
    }
    let u = scale(axis, 1.0 / len);
    DirectionSpec::new(u, aperture)?;
    let from_a = cone_dilation(a, ConeAxis::Fixed(u), aperture, t);
    let from_b = cone_dilation(b, ConeAxis::Fixed(scale(u, -1.0)), aperture, t);
    let values = from_a
        .iter()
        .zip(&from_b)
        .zip(a.values().iter().zip(b.values()))
        .map(|((&la, &lb), (&ma, &mb))| {
            let inside = ma.max(mb) >= 0.5;
            if inside {
                0.0
            } else {
                la.min(lb)
            }
        })
        .collect();
    Ok(FuzzyVolume::from_raw(a.geometry().clone(), values))
}

/// 1 within `inner` mm of the region, linear down to 0 at `outer` mm.
pub fn distance_band_landscape(region: &FuzzyVolume, band: (f64, f64)) -> Result<FuzzyVolume> {
    region.ensure_crisp("distance_band_landscape")?;
    let (inner, outer) = band;
    if !(inner >= 0.0 && inner < outer) {
        return Err(Error::InvalidArgument(format!(
            "band ({inner}, {outer}) must satisfy 0 <= inner < outer"
        )));
    }
    if region.support_len() == 0 {
        return Err(Error::InvalidArgument("distance band: empty region".into()));
    }
    let dist = distance_to_region(region)?;
    let values = dist
        .values()
        .iter()
        .map(|&d| band_ramp(d, inner, outer))
        .collect();
    Ok(FuzzyVolume::from_raw(region.geometry().clone(), values))
}

#[inline]
fn band_ramp(d: f64, inner: f64, outer: f64) -> f64 {
    if d <= inner {
        1.0
    } else if d >= outer {
        0.0
    } else {
        (outer - d) / (outer - inner)
    }
}

/// "About n" applied to the fuzzy count of endpoints lying in `region`.
pub fn connected_degree(
    endpoints: &[Point3],
    region: &FuzzyVolume,
    q: &TriangularQuantifier,
) -> Result<TruthDegree> {
    if endpoints.is_empty() {
        return Err(Error::InvalidArgument("connected_degree needs endpoints".into()));
    }
    let count: f64 = endpoints
        .iter()
        .map(|&p| sample_trilinear(region, p).value())
        .sum();
    Ok(quantifier_degree(q, count))
}

/// Anatomical directions used to name world axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Anatomical {
    Left,
    Right,
    Anterior,
    Posterior,
    Superior,
    Inferior,
}

impl Anatomical {
    fn opposite(self) -> Anatomical {
        match self {
            Anatomical::Left => Anatomical::Right,
            Anatomical::Right => Anatomical::Left,
            Anatomical::Anterior => Anatomical::Posterior,
            Anatomical::Posterior => Anatomical::Anterior,
            Anatomical::Superior => Anatomical::Inferior,
            Anatomical::Inferior => Anatomical::Superior,
        }
    }

    fn pair(self) -> usize {
        match self {
            Anatomical::Left | Anatomical::Right => 0,
            Anatomical::Anterior | Anatomical::Posterior => 1,
            Anatomical::Superior | Anatomical::Inferior => 2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Anatomical::Left => "left",
            Anatomical::Right => "right",
            Anatomical::Anterior => "anterior",
            Anatomical::Posterior => "posterior",
            Anatomical::Superior => "superior",
            Anatomical::Inferior => "inferior",
        }
    }
}

impl FromStr for Anatomical {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "left" => Anatomical::Left,
            "right" => Anatomical::Right,
            "anterior" => Anatomical::Anterior,
            "posterior" => Anatomical::Posterior,
            "superior" => Anatomical::Superior,
            "inferior" => Anatomical::Inferior,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown anatomical direction '{other}'"
                )))
            }
        })
    }
}

/// Which anatomical direction each positive world axis points to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frame {
    axes: [Anatomical; 3],
}

impl Default for Frame {
    fn default() -> Self {
        Frame {
            axes: [Anatomical::Left, Anatomical::Anterior, Anatomical::Superior],
        }
    }
}

impl Frame {
    pub fn new(axes: [Anatomical; 3]) -> Result<Self> {
        let mut seen = [false; 3];
        for a in axes {
            if std::mem::replace(&mut seen[a.pair()], true) {
                return Err(Error::InvalidArgument(format!(
                    "frame assigns the {} axis twice",
                    a.name()
                )));
            }
        }
        Ok(Frame { axes })
    }

    /// Parses `x=left y=anterior z=superior` (any order of the three terms).
    pub fn parse(text: &str) -> Result<Self> {
        let mut axes: [Option<Anatomical>; 3] = [None; 3];
        for term in text.split_whitespace() {
            let (axis, dir) = term
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("bad frame term '{term}'")))?;
            let i = match axis {
                "x" => 0,
                "y" => 1,
                "z" => 2,
                _ => return Err(Error::InvalidArgument(format!("bad frame axis '{axis}'"))),
            };
            if axes[i].replace(dir.parse()?).is_some() {
                return Err(Error::InvalidArgument(format!("frame axis {axis} given twice")));
            }
        }
        match axes {
            [Some(x), Some(y), Some(z)] => Frame::new([x, y, z]),
            _ => Err(Error::InvalidArgument(
                "frame must name x, y and z".into(),
            )),
        }
    }

    /// World unit vector pointing towards `dir`.
    pub fn vector(&self, dir: Anatomical) -> Point3 {
        let mut v = [0.0; 3];
        for (i, &a) in self.axes.iter().enumerate() {
            if a == dir {
                v[i] = 1.0;
            } else if a == dir.opposite() {
                v[i] = -1.0;
            }
        }
        v
    }

    /// World axis index carrying the left-right direction.
    pub fn lateral_axis(&self) -> usize {
        self.axes.iter().position(|a| a.pair() == 0).unwrap()
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "x={} y={} z={}",
            self.axes[0].name(),
            self.axes[1].name(),
            self.axes[2].name()
        )
    }
}

#[inline]
pub(crate) fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn scale(a: Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub(crate) fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}
