//! Scene files: named structures, the anatomical frame and default parameters.
//!
//! ```text
//! structure Canal labels phantom.lvol 1
//! structure Muscle fuzzy muscle.fvol
//! structure CanalHole hole canal_hole.lvol
//! frame x=left y=anterior z=superior
//! default threshold 0.5
//! ```
//!
//! Relative paths are resolved against the scene file's directory.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::fiber::{Axis, Sense};
use crate::io::{load_volume, Volume};
use crate::lattice::TNorm;
use crate::query::Combiner;
use crate::relations::{Frame, RelationParams};
use crate::volume::{from_label, FuzzyVolume, Geometry, LabelVolume};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureKind {
    /// A region (crisp from labels or fuzzy from a membership volume).
    Region,
    /// A loop interior given explicitly; crossing uses it without closing.
    Hole,
}

#[derive(Debug, Clone)]
pub struct Structure {
    pub name: String,
    pub kind: StructureKind,
    pub volume: Arc<FuzzyVolume>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneDefaults {
    pub tnorm: TNorm,
    pub relation: RelationParams,
    /// Cone half-angle in radians.
    pub aperture: f64,
    pub combiner: Combiner,
    pub threshold: Option<f64>,
    pub per_clause_threshold: Option<f64>,
    pub step_mm: f64,
    pub orient_axis: Axis,
    pub orient_sense: Sense,
    /// Midline coordinate (mm) along the lateral axis; grid centre when unset.
    pub midline: Option<f64>,
}

impl Default for SceneDefaults {
    fn default() -> Self {
        SceneDefaults {
            tnorm: TNorm::default(),
            relation: RelationParams::default(),
            aperture: PI / 2.0,
            combiner: Combiner::default(),
            threshold: None,
            per_clause_threshold: None,
            step_mm: 1.0,
            orient_axis: Axis::Z,
            orient_sense: Sense::Descending,
            midline: None,
        }
    }
}

impl SceneDefaults {
    /// Applies one `default <param> <value>` entry.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidArgument(format!("'{key}' needs a number, got '{value}'")))
        };
        let unit = |v: f64| -> Result<f64> {
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(Error::InvalidArgument(format!("'{key}' must lie in [0, 1], got {v}")))
            }
        };
        match key {
            "tnorm" => self.tnorm = value.parse()?,
            "aggregation" => self.relation.aggregation = value.parse()?,
            "combiner" => self.combiner = value.parse()?,
            "threshold" => self.threshold = Some(unit(num()?)?),
            "per_clause_threshold" => self.per_clause_threshold = Some(unit(num()?)?),
            "aperture" => {
                let deg = num()?;
                if !(deg > 0.0 && deg <= 180.0) {
                    return Err(Error::InvalidArgument(format!(
                        "aperture must lie in (0, 180] degrees, got {deg}"
                    )));
                }
                self.aperture = deg.to_radians();
            }
            "margin" => self.relation.contour_margin_mm = num()?,
            "closing_radius" => self.relation.closing_radius_mm = num()?,
            "near_inner" => self.relation.near_band_mm.0 = num()?,
            "near_outer" => self.relation.near_band_mm.1 = num()?,
            "step" => {
                let step = num()?;
                if step <= 0.0 {
                    return Err(Error::InvalidArgument("step must be > 0".into()));
                }
                self.step_mm = step;
            }
            "orient_axis" => self.orient_axis = value.parse()?,
            "orient_sense" => self.orient_sense = value.parse()?,
            "midline" => self.midline = Some(num()?),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown default '{key}' (known: tnorm, aggregation, combiner, threshold, \
                     per_clause_threshold, aperture, margin, closing_radius, near_inner, \
                     near_outer, step, orient_axis, orient_sense, midline)"
                )))
            }
        }
        self.relation.validate()
    }
}

/// Named structures on one shared grid, plus frame and defaults.
#[derive(Debug, Clone)]
pub struct Scene {
    structures: IndexMap<String, Structure>,
    geometry: Option<Geometry>,
    pub frame: Frame,
    pub defaults: SceneDefaults,
}

impl Default for Scene {
    fn default() -> Self {
        Scene::new(Frame::default(), SceneDefaults::default())
    }
}

impl Scene {
    pub fn new(frame: Frame, defaults: SceneDefaults) -> Self {
        Scene {
            structures: IndexMap::new(),
            geometry: None,
            frame,
            defaults,
        }
    }

    pub fn add(&mut self, name: &str, kind: StructureKind, volume: FuzzyVolume) -> Result<()> {
        if self.structures.contains_key(name) {
            return Err(Error::InvalidArgument(format!("duplicate structure name '{name}'")));
        }
        match &self.geometry {
            Some(g) => g.ensure_matches(volume.geometry())?,
            None => self.geometry = Some(volume.geometry().clone()),
        }
        if kind == StructureKind::Hole {
            volume.ensure_crisp("hole structure")?;
        }
        self.structures.insert(
            name.to_string(),
            Structure {
                name: name.to_string(),
                kind,
                volume: Arc::new(volume),
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Structure> {
        self.structures.get(name)
    }

    /// Looks up a structure, listing the available names on failure.
    pub fn structure(&self, name: &str) -> Result<&Structure> {
        self.get(name).ok_or_else(|| {
            let names: Vec<&str> = self.names().collect();
            Error::Resolve(format!(
                "unknown structure '{name}' (available: {})",
                if names.is_empty() { "none".to_string() } else { names.join(", ") }
            ))
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.structures.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.structures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.structures.is_empty()
    }

    pub fn geometry(&self) -> Option<&Geometry> {
        self.geometry.as_ref()
    }

    /// Midline coordinate along the lateral axis.
    pub fn midline(&self) -> Option<f64> {
        self.defaults.midline.or_else(|| {
            let g = self.geometry.as_ref()?;
            let (lo, hi) = g.bounds();
            let a = self.frame.lateral_axis();
            Some(0.5 * (lo[a] + hi[a]))
        })
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_scene(&text, &base, &path.display().to_string())
}

/// Parses scene text; `base` anchors relative volume paths.
pub fn parse_scene(text: &str, base: &Path, name: &str) -> Result<Scene> {
    let err = |line: usize, message: String| Error::Scene {
        path: name.to_string(),
        line,
        message,
    };
    let mut scene = Scene::default();
    let mut frame_seen = false;
    let mut label_cache: HashMap<PathBuf, Arc<LabelVolume>> = HashMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        match words[0] {
            "structure" => {
                let (sname, kind, rest) = match words.as_slice() {
                    [_, n, k, rest @ ..] => (*n, *k, rest),
                    _ => return Err(err(line_no, "expected 'structure <Name> <kind> ...'".into())),
                };
                if !is_identifier(sname) {
                    return Err(err(line_no, format!("'{sname}' is not a valid structure name")));
                }
                let resolve = |p: &str| -> PathBuf {
                    let p = Path::new(p);
                    if p.is_absolute() { p.to_path_buf() } else { base.join(p) }
                };
                let load = |p: &PathBuf| -> Result<Volume> {
                    if !p.exists() {
                        return Err(err(line_no, format!("file not found: {}", p.display())));
                    }
                    load_volume(p).map_err(|e| err(line_no, e.to_string()))
                };
                let (kind, volume) = match (kind, rest) {
                    ("labels", [p, id]) => {
                        let label: u32 = id
                            .parse()
                            .ok()
                            .filter(|&l| l >= 1)
                            .ok_or_else(|| err(line_no, format!("label id must be >= 1, got '{id}'")))?;
                        let p = resolve(p);
                        let lv = match label_cache.get(&p) {
                            Some(lv) => lv.clone(),
                            None => {
                                let Volume::Labels(lv) = load(&p)? else {
                                    return Err(err(line_no, format!("{} is not a label volume", p.display())));
                                };
                                let lv = Arc::new(lv);
                                label_cache.insert(p.clone(), lv.clone());
                                lv
                            }
                        };
                        let mask = from_label(&lv, label).map_err(|e| err(line_no, e.to_string()))?;
                        if let Some(w) = &mask.warning {
                            log::warn!("{name}:{line_no}: structure {sname}: {w}");
                        }
                        (StructureKind::Region, mask.value)
                    }
                    ("fuzzy", [p]) => match load(&resolve(p))? {
                        Volume::Fuzzy(v) => (StructureKind::Region, v),
                        Volume::Labels(_) => {
                            return Err(err(line_no, format!("{p} is not a fuzzy volume")))
                        }
                    },
                    ("hole", [p]) => {
                        let v = match load(&resolve(p))? {
                            Volume::Fuzzy(v) => v,
                            Volume::Labels(lv) => {
                                let vals = lv.labels().iter().map(|&l| if l > 0 { 1.0 } else { 0.0 }).collect();
                                FuzzyVolume::new(lv.geometry().clone(), vals)?
                            }
                        };
                        (StructureKind::Hole, v)
                    }
                    _ => {
                        return Err(err(
                            line_no,
                            format!(
                                "expected 'labels <path> <id>', 'fuzzy <path>' or 'hole <path>' after structure {sname}"
                            ),
                        ))
                    }
                };
                scene
                    .add(sname, kind, volume)
                    .map_err(|e| err(line_no, e.to_string()))?;
            }
            "frame" => {
                if std::mem::replace(&mut frame_seen, true) {
                    return Err(err(line_no, "frame given twice".into()));
                }
                scene.frame = Frame::parse(&words[1..].join(" "))
                    .map_err(|e| err(line_no, e.to_string()))?;
            }
            "default" => match words.as_slice() {
                [_, key, value] => scene
                    .defaults
                    .set(key, value)
                    .map_err(|e| err(line_no, e.to_string()))?,
                _ => return Err(err(line_no, "expected 'default <param> <value>'".into())),
            },
            other => return Err(err(line_no, format!("unknown directive '{other}'"))),
        }
    }
    Ok(scene)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
