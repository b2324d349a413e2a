//! Binding atoms to landscapes from a scene, and per-fiber evaluation.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::ast::{Atom, Expr, QueryAst, Relation};
use super::eval::{evaluate_samples, ClauseNode, EvalOptions, FiberResult};
use super::source::QueryOptions;
use crate::cache::{cache_key, LandscapeCache};
use crate::error::{Error, Result, Warned};
use crate::fiber::{orient, resample, Axis, Fiber, Sense};
use crate::relations::{
    between_landscape, bilateral_landscape, connected_degree, crossing_from_hole,
    crossing_landscape, directional_landscape, distance_band_landscape, toward_plane_landscape,
    Anatomical, DirectionSpec, RelationParams, TriangularQuantifier,
};
use crate::scene::{Scene, StructureKind};
use crate::volume::{sample_raw, FuzzyVolume};

/// How one distinct atom is sampled along a fiber.
#[derive(Debug, Clone)]
pub enum SlotBinding {
    Landscape(Arc<FuzzyVolume>),
    /// Per-fiber constant from the fuzzy count of endpoints in the region.
    Endpoints {
        region: Arc<FuzzyVolume>,
        quantifier: TriangularQuantifier,
    },
}

#[derive(Debug, Clone)]
pub struct Slot {
    /// Canonical description of the atom with all parameters filled in.
    pub key: String,
    pub binding: SlotBinding,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberPrep {
    pub step_mm: f64,
    pub axis: Axis,
    pub sense: Sense,
}

#[derive(Debug, Clone)]
pub struct ResolvedQuery {
    pub slots: Vec<Slot>,
    pub clauses: Vec<ClauseNode>,
    pub options: EvalOptions,
    pub prep: FiberPrep,
}

/// A fully parameterised atom, ready to compute.
#[derive(Debug, Clone)]
struct Plan {
    relation: Relation,
    args: Vec<String>,
    canonical: String,
    aperture: f64,
    margin: f64,
    radius: f64,
    band: (f64, f64),
    quantifier: Option<TriangularQuantifier>,
}

fn direction_of(relation: Relation) -> Option<Anatomical> {
    match relation {
        Relation::AnteriorOf => Some(Anatomical::Anterior),
        Relation::PosteriorOf => Some(Anatomical::Posterior),
        Relation::InferiorOf => Some(Anatomical::Inferior),
        Relation::SuperiorOf => Some(Anatomical::Superior),
        _ => None,
    }
}

fn plan(atom: &Atom, scene: &Scene) -> Result<Plan> {
    for name in &atom.args {
        scene.structure(name)?;
    }
    let d = &scene.defaults;
    let aperture = match atom.param("aperture") {
        Some(deg) if deg > 0.0 && deg <= 180.0 => deg.to_radians(),
        Some(deg) => {
            return Err(Error::Resolve(format!(
                "{atom}: aperture must lie in (0, 180] degrees, got {deg}"
            )))
        }
        None => d.aperture,
    };
    let margin = atom.param("margin").unwrap_or(d.relation.contour_margin_mm);
    let radius = atom.param("radius").unwrap_or(d.relation.closing_radius_mm);
    let band = (
        atom.param("inner").unwrap_or(d.relation.near_band_mm.0),
        atom.param("outer").unwrap_or(d.relation.near_band_mm.1),
    );
    let check = RelationParams {
        contour_margin_mm: margin,
        closing_radius_mm: radius,
        near_band_mm: band,
        aggregation: d.relation.aggregation,
    };
    check.validate().map_err(|e| Error::Resolve(format!("{atom}: {e}")))?;
    let quantifier = match atom.relation {
        Relation::ConnectedAbout => {
            let (n, w) = (atom.param("n").unwrap_or(0.0), atom.param("w").unwrap_or(0.0));
            Some(TriangularQuantifier::new(n, w).map_err(|e| Error::Resolve(format!("{atom}: {e}")))?)
        }
        _ => None,
    };

    let args = atom.args.join(",");
    let frame = scene.frame;
    let canonical = match atom.relation {
        Relation::Crossing => {
            if scene.structure(&atom.args[0])?.kind == StructureKind::Hole {
                format!("crossing({args};hole)")
            } else {
                format!("crossing({args};radius={radius:?})")
            }
        }
        Relation::AnteriorOf | Relation::PosteriorOf | Relation::InferiorOf | Relation::SuperiorOf => {
            let v = frame.vector(direction_of(atom.relation).unwrap());
            format!("{}({args};dir={v:?};aperture={aperture:?};margin={margin:?})", atom.relation)
        }
        Relation::LateralOf => format!(
            "lateral_of({args};axis={:?};aperture={aperture:?};margin={margin:?})",
            frame.vector(Anatomical::Left)
        ),
        Relation::MedialOf => format!(
            "medial_of({args};axis={:?};midline={:?};aperture={aperture:?};margin={margin:?})",
            frame.vector(Anatomical::Left),
            scene.midline()
        ),
        Relation::Between => format!("between({args};aperture={aperture:?})"),
        Relation::Near => format!("near({args};inner={:?};outer={:?})", band.0, band.1),
        Relation::ConnectedAbout => {
            let q = quantifier.unwrap();
            format!("connected_about({args};n={:?};w={:?})", q.modal(), q.halfwidth())
        }
    };
    Ok(Plan {
        relation: atom.relation,
        args: atom.args.clone(),
        canonical,
        aperture,
        margin,
        radius,
        band,
        quantifier,
    })
}

fn crisp(v: &FuzzyVolume) -> FuzzyVolume {
    if v.is_crisp() {
        v.clone()
    } else {
        v.binarize(0.5)
    }
}

fn compute(plan: &Plan, scene: &Scene) -> Result<Warned<FuzzyVolume>> {
    let t = scene.defaults.tnorm;
    let s0 = scene.structure(&plan.args[0])?;
    let region = s0.volume.as_ref();
    let params = RelationParams {
        contour_margin_mm: plan.margin,
        closing_radius_mm: plan.radius,
        near_band_mm: plan.band,
        ..scene.defaults.relation
    };
    let frame = scene.frame;
    match plan.relation {
        Relation::Crossing => {
            if s0.kind == StructureKind::Hole {
                crossing_from_hole(region).map(Warned::ok)
            } else {
                crossing_landscape(&crisp(region), &params)
            }
        }
        Relation::AnteriorOf | Relation::PosteriorOf | Relation::InferiorOf | Relation::SuperiorOf => {
            let dir = DirectionSpec::new(frame.vector(direction_of(plan.relation).unwrap()), plan.aperture)?;
            directional_landscape(region, &dir, &params, t)
        }
        Relation::LateralOf => {
            bilateral_landscape(region, frame.vector(Anatomical::Left), plan.aperture, &params, t)
        }
        Relation::MedialOf => {
            let midline = scene
                .midline()
                .ok_or_else(|| Error::Resolve("medial_of needs a midline".into()))?;
            toward_plane_landscape(
                region,
                frame.vector(Anatomical::Left),
                midline,
                plan.aperture,
                &params,
                t,
            )
        }
        Relation::Between => {
            let other = scene.structure(&plan.args[1])?.volume.as_ref();
            between_landscape(region, other, plan.aperture, t).map(Warned::ok)
        }
        Relation::Near => distance_band_landscape(&crisp(region), plan.band).map(Warned::ok),
        Relation::ConnectedAbout => unreachable!("endpoint atoms have no landscape"),
    }
}

fn cached_compute(plan: &Plan, scene: &Scene, cache: Option<&LandscapeCache>) -> Result<FuzzyVolume> {
    let inputs: Vec<&FuzzyVolume> = plan
        .args
        .iter()
        .map(|a| scene.structure(a).map(|s| s.volume.as_ref()))
        .collect::<Result<_>>()?;
    let key = cache.map(|_| {
        cache_key(&inputs, plan.relation.name(), &plan.canonical, scene.defaults.tnorm)
    });
    if let (Some(c), Some(k)) = (cache, &key) {
        if let Some(v) = c.get(k) {
            log::debug!("cache hit for {}", plan.canonical);
            return Ok(v);
        }
    }
    let out = compute(plan, scene).map_err(|e| Error::Resolve(format!("{}: {e}", plan.canonical)))?;
    if let Some(w) = &out.warning {
        log::warn!("{}: {w}", plan.canonical);
    }
    if let (Some(c), Some(k)) = (cache, &key) {
        if let Err(e) = c.put(k, &out.value) {
            log::warn!("could not store cache entry: {e}");
        }
    }
    Ok(out.value)
}

/// Computes the landscape of a single atom, consulting the cache if one is given.
pub fn atom_landscape(atom: &Atom, scene: &Scene, cache: Option<&LandscapeCache>) -> Result<FuzzyVolume> {
    if atom.relation == Relation::ConnectedAbout {
        return Err(Error::Resolve(format!("{atom} is evaluated at fiber endpoints and has no landscape")));
    }
    cached_compute(&plan(atom, scene)?, scene, cache)
}

/// Binds every atom of `ast`; identical atoms share one landscape.
pub fn resolve(
    ast: &QueryAst,
    options: &QueryOptions,
    scene: &Scene,
    cache: Option<&LandscapeCache>,
) -> Result<ResolvedQuery> {
    let mut plans: Vec<Plan> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let clauses = ast
        .clauses
        .iter()
        .map(|c| bind(c, scene, &mut plans, &mut index))
        .collect::<Result<Vec<_>>>()?;

    let slots = plans
        .par_iter()
        .map(|p| {
            let binding = match p.quantifier {
                Some(quantifier) => SlotBinding::Endpoints {
                    region: scene.structure(&p.args[0])?.volume.clone(),
                    quantifier,
                },
                None => SlotBinding::Landscape(Arc::new(cached_compute(p, scene, cache)?)),
            };
            Ok(Slot {
                key: p.canonical.clone(),
                binding,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let d = &scene.defaults;
    Ok(ResolvedQuery {
        slots,
        clauses,
        options: EvalOptions {
            tnorm: d.tnorm,
            aggregation: options.aggregation.unwrap_or(d.relation.aggregation),
            combiner: options.combiner.unwrap_or(d.combiner),
            threshold: options.threshold.or(d.threshold).unwrap_or(0.5),
            per_clause_threshold: options.per_clause_threshold.or(d.per_clause_threshold),
        },
        prep: FiberPrep {
            step_mm: d.step_mm,
            axis: d.orient_axis,
            sense: d.orient_sense,
        },
    })
}

fn bind(
    e: &Expr,
    scene: &Scene,
    plans: &mut Vec<Plan>,
    index: &mut HashMap<String, usize>,
) -> Result<ClauseNode> {
    Ok(match e {
        Expr::Atom(a) => {
            let p = plan(a, scene)?;
            let next = plans.len();
            let slot = *index.entry(p.canonical.clone()).or_insert(next);
            if slot == next {
                plans.push(p);
            }
            ClauseNode::Slot(slot)
        }
        Expr::Not(c) => ClauseNode::Not(Box::new(bind(c, scene, plans, index)?)),
        Expr::And(l, r) => ClauseNode::And(
            Box::new(bind(l, scene, plans, index)?),
            Box::new(bind(r, scene, plans, index)?),
        ),
        Expr::Or(l, r) => ClauseNode::Or(
            Box::new(bind(l, scene, plans, index)?),
            Box::new(bind(r, scene, plans, index)?),
        ),
    })
}

impl ResolvedQuery {
    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidArgument(format!("threshold {threshold} outside [0, 1]")));
        }
        self.options.threshold = threshold;
        Ok(self)
    }

    /// Orients then resamples; `None` for a fiber of zero length.
    pub fn prepare(&self, f: &Fiber) -> Option<Fiber> {
        let oriented = orient(f, self.prep.axis, self.prep.sense);
        resample(&oriented, self.prep.step_mm).ok()
    }

    /// Per-slot degrees at each point of a prepared fiber.
    pub fn sample(&self, prepared: &Fiber) -> Vec<Vec<f64>> {
        self.slots
            .iter()
            .map(|s| match &s.binding {
                SlotBinding::Landscape(v) => prepared
                    .points()
                    .iter()
                    .map(|&p| sample_raw(v.geometry(), v.values(), p))
                    .collect(),
                SlotBinding::Endpoints { region, quantifier } => {
                    let d = connected_degree(&prepared.endpoints(), region, quantifier)
                        .map(|d| d.value())
                        .unwrap_or(0.0);
                    vec![d; prepared.len()]
                }
            })
            .collect()
    }
}

pub fn evaluate_fiber(q: &ResolvedQuery, f: &Fiber) -> FiberResult {
    match q.prepare(f) {
        Some(p) => evaluate_samples(f.id(), &q.clauses, &q.sample(&p), p.len(), &q.options),
        None => {
            log::warn!("fiber {} has zero length and is rejected", f.id());
            evaluate_samples(f.id(), &q.clauses, &[], 0, &q.options)
        }
    }
}

/// Results in input order, independent of scheduling.
pub fn evaluate_set(q: &ResolvedQuery, fibers: &[Fiber]) -> Vec<FiberResult> {
    fibers.par_iter().map(|f| evaluate_fiber(q, f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse_query;
    use crate::scene::SceneDefaults;
    use crate::relations::Frame;
    use crate::volume::Geometry;

    fn scene() -> Scene {
        let g = Geometry::new([12, 12, 12], [1.0; 3], [0.0; 3]).unwrap();
        let block = |lo: [usize; 3], hi: [usize; 3]| {
            FuzzyVolume::from_fn(g.clone(), |c| {
                let inside = (0..3).all(|i| c[i] >= lo[i] && c[i] <= hi[i]);
                if inside { 1.0 } else { 0.0 }
            })
            .unwrap()
        };
        let mut s = Scene::new(Frame::default(), SceneDefaults::default());
        s.add("A", StructureKind::Region, block([5, 2, 5], [6, 3, 6])).unwrap();
        s.add("B", StructureKind::Region, block([5, 8, 5], [6, 9, 6])).unwrap();
        s
    }

    #[test]
    fn repeated_atoms_share_a_slot() {
        let ast = parse_query("anterior_of(A) then not anterior_of(A) then anterior_of(A, aperture=45)").unwrap();
        let q = resolve(&ast, &QueryOptions::default(), &scene(), None).unwrap();
        assert_eq!(q.slots.len(), 2);
        assert_eq!(q.clauses[0], ClauseNode::Slot(0));
        assert_eq!(q.clauses[2], ClauseNode::Slot(1));
    }

    #[test]
    fn unknown_structure_lists_names() {
        let ast = parse_query("near(Missing)").unwrap();
        let msg = resolve(&ast, &QueryOptions::default(), &scene(), None).unwrap_err().to_string();
        assert!(msg.contains("Missing") && msg.contains("A, B"), "{msg}");
    }

    #[test]
    fn threshold_precedence() {
        let ast = parse_query("near(A)").unwrap();
        let mut s = scene();
        let q = resolve(&ast, &QueryOptions::default(), &s, None).unwrap();
        assert_eq!(q.options.threshold, 0.5);
        s.defaults.threshold = Some(0.7);
        let q = resolve(&ast, &QueryOptions::default(), &s, None).unwrap();
        assert_eq!(q.options.threshold, 0.7);
        let opts = QueryOptions { threshold: Some(0.6), ..Default::default() };
        let q = resolve(&ast, &opts, &s, None).unwrap();
        assert_eq!(q.options.threshold, 0.6);
        assert_eq!(q.with_threshold(0.2).unwrap().options.threshold, 0.2);
    }

    #[test]
    fn fiber_passing_a_then_b() {
        let s = scene();
        let ast = parse_query("near(A, inner=0.5, outer=1.5) then near(B, inner=0.5, outer=1.5)").unwrap();
        let mut q = resolve(&ast, &QueryOptions::default(), &s, None).unwrap();
        q.prep.axis = Axis::Y;
        q.prep.sense = Sense::Ascending;
        let f = Fiber::new(1, vec![[5.5, 0.0, 5.5], [5.5, 11.0, 5.5]]).unwrap();
        let r = evaluate_fiber(&q, &f);
        assert_eq!(r.degree, 1.0);
        assert!(r.accepted);
        // Reversed travel is re-oriented to the same answer.
        let back = Fiber::new(2, vec![[5.5, 11.0, 5.5], [5.5, 0.0, 5.5]]).unwrap();
        assert_eq!(evaluate_fiber(&q, &back).degree, 1.0);
        let results = evaluate_set(&q, &[f.clone(), back, f]);
        assert_eq!(results.iter().map(|r| r.id).collect::<Vec<_>>(), vec![1, 2, 1]);
        assert_eq!(results[0], results[2]);
    }

    #[test]
    fn cache_is_transparent() {
        let dir = tempfile::tempdir().unwrap();
        let cache = LandscapeCache::open(dir.path()).unwrap();
        let s = scene();
        let atom = match &parse_query("anterior_of(A)").unwrap().clauses[0] {
            Expr::Atom(a) => a.clone(),
            _ => unreachable!(),
        };
        let plain = atom_landscape(&atom, &s, None).unwrap();
        let first = atom_landscape(&atom, &s, Some(&cache)).unwrap();
        let second = atom_landscape(&atom, &s, Some(&cache)).unwrap();
        assert_eq!(cache.hits(), 1);
        assert_eq!(plain.values(), first.values());
        assert_eq!(plain.values(), second.values());
    }

    #[test]
    fn connected_about_is_constant_per_fiber() {
        let s = scene();
        let ast = parse_query("connected_about(A, n=1, w=1)").unwrap();
        let q = resolve(&ast, &QueryOptions::default(), &s, None).unwrap();
        let f = Fiber::new(1, vec![[5.5, 2.5, 9.0], [5.5, 2.5, 5.5]]).unwrap();
        let samples = q.sample(&q.prepare(&f).unwrap());
        assert!(samples[0].iter().all(|&v| v == 1.0));
    }
}
