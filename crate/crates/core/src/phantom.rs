//! Deterministic synthetic pelvis: a torus "canal", two ellipsoid "muscles", and fibers with
//! known ground truth.
//!
//! Positive fibers descend through the canal's hole, pass anterior of muscle A, and finish
//! posterior of muscle B. Decoys miss the hole, pass behind muscle A, or visit the waypoints in
//! the wrong order.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fiber::{Fiber, FiberId};
use crate::io::{write_labels, Encoding, FiberWriter};
use crate::relations::{dot, norm, scale, sub};
use crate::volume::{Geometry, LabelVolume, Point3};

pub const CANAL_LABEL: u32 = 1;
pub const MUSCLE_A_LABEL: u32 = 2;
pub const MUSCLE_B_LABEL: u32 = 3;

pub const QUERY: &str = "crossing(Canal)\nthen anterior_of(MuscleA)\nthen not anterior_of(MuscleB)\n";

#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    pub center: Point3,
    pub radii: Point3,
}

impl Ellipsoid {
    fn contains(&self, p: Point3) -> bool {
        (0..3)
            .map(|i| ((p[i] - self.center[i]) / self.radii[i]).powi(2))
            .sum::<f64>()
            <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub seed: u64,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub torus_center: Point3,
    pub torus_axis: Point3,
    /// Distance from the torus centre to the tube centre line.
    pub torus_major: f64,
    /// Tube radius; the hole has radius `torus_major - torus_minor`.
    pub torus_minor: f64,
    pub muscle_a: Ellipsoid,
    pub muscle_b: Ellipsoid,
    pub positives: usize,
    pub decoys: usize,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            seed: 42,
            dims: [56, 64, 84],
            spacing: [1.0; 3],
            torus_center: [28.0, 28.0, 64.0],
            torus_axis: [0.0, 0.0, 1.0],
            torus_major: 12.0,
            torus_minor: 7.0,
            muscle_a: Ellipsoid {
                center: [28.0, 24.0, 36.0],
                radii: [8.0, 6.0, 6.0],
            },
            muscle_b: Ellipsoid {
                center: [28.0, 50.0, 16.0],
                radii: [8.0, 5.0, 6.0],
            },
            positives: 20,
            decoys: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Positive,
    MissHole,
    WrongSide,
    ReversedOrder,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Positive => "positive",
            Family::MissHole => "miss_hole",
            Family::WrongSide => "wrong_side",
            Family::ReversedOrder => "reversed_order",
        }
    }

    pub fn expected(self) -> bool {
        self == Family::Positive
    }
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub labels: LabelVolume,
    pub hole: LabelVolume,
    /// Fibers with their family, in file order.
    pub fibers: Vec<(Fiber, Family)>,
    pub spec: PhantomSpec,
}

fn in_box(p: Point3, hi: Point3) -> bool {
    (0..3).all(|i| p[i] >= 0.0 && p[i] <= hi[i])
}

fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

impl PhantomSpec {
    fn hole_radius(&self) -> f64 {
        self.torus_major - self.torus_minor
    }

    fn axis(&self) -> Point3 {
        scale(self.torus_axis, 1.0 / norm(self.torus_axis))
    }

    fn hole_top(&self) -> Point3 {
        add(self.torus_center, scale(self.axis(), 16.0))
    }

    fn hole_bottom(&self) -> Point3 {
        add(self.torus_center, scale(self.axis(), -10.0))
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("phantom: {m}")));
        if self.spacing.iter().any(|&s| s <= 0.0) || self.dims.contains(&0) {
            return bad("dims and spacing must be positive".into());
        }
        if !(norm(self.torus_axis) > 0.0) {
            return bad("torus axis must be nonzero".into());
        }
        if !(self.torus_minor > 0.0 && self.torus_major > self.torus_minor) {
            return bad("torus radii must satisfy 0 < minor < major".into());
        }
        let hi: Point3 = std::array::from_fn(|i| (self.dims[i] - 1) as f64 * self.spacing[i]);
        let reach = self.torus_major + self.torus_minor;
        let c = self.torus_center;
        let corners_ok = (0..3).all(|i| c[i] - reach >= 0.0 && c[i] + reach <= hi[i]);
        if !corners_ok {
            return bad(format!("torus (centre {c:?}, reach {reach} mm) does not fit the grid"));
        }
        for (name, e) in [("muscle A", &self.muscle_a), ("muscle B", &self.muscle_b)] {
            if e.radii.iter().any(|&r| r <= 0.0) {
                return bad(format!("{name} radii must be positive"));
            }
            if !(0..3).all(|i| e.center[i] - e.radii[i] >= 0.0 && e.center[i] + e.radii[i] <= hi[i]) {
                return bad(format!("{name} does not fit the grid"));
            }
        }
        let a = &self.muscle_a;
        let b = &self.muscle_b;
        if a.center[1] + a.radii[1] + 10.0 >= b.center[1] - b.radii[1] {
            return bad("muscle B must lie well anterior of muscle A".into());
        }
        for p in [self.hole_top(), self.hole_bottom(), add(self.hole_top(), [reach + 4.0, 0.0, 2.0])] {
            if !in_box(p, hi) {
                return bad(format!("fiber waypoint {p:?} falls outside the grid"));
            }
        }
        if self.positives == 0 {
            return bad("at least one positive fiber is required".into());
        }
        Ok(())
    }

    fn geometry(&self) -> Result<Geometry> {
        Geometry::new(self.dims, self.spacing, [0.0; 3])
    }

    fn in_torus(&self, p: Point3) -> bool {
        let a = self.axis();
        let rel = sub(p, self.torus_center);
        let h = dot(rel, a);
        let rho = norm(sub(rel, scale(a, h)));
        (rho - self.torus_major).powi(2) + h * h <= self.torus_minor.powi(2)
    }

    /// Tunnel through the torus: within the hole radius of the axis and within the tube's
    /// half-thickness of the torus plane.
    fn in_hole(&self, p: Point3) -> bool {
        let a = self.axis();
        let rel = sub(p, self.torus_center);
        let h = dot(rel, a);
        let rho = norm(sub(rel, scale(a, h)));
        rho < self.hole_radius() && h.abs() <= self.torus_minor && !self.in_torus(p)
    }
}

fn jitter(rng: &mut ChaCha8Rng, p: Point3, amp: Point3) -> Point3 {
    std::array::from_fn(|i| p[i] + rng.gen_range(-amp[i]..=amp[i]))
}

/// Polyline through `waypoints` with points every `step` mm along each leg.
fn polyline(waypoints: &[Point3], step: f64) -> Vec<Point3> {
    let mut pts = vec![waypoints[0]];
    for w in waypoints.windows(2) {
        let d = sub(w[1], w[0]);
        let n = (norm(d) / step).ceil().max(1.0) as usize;
        for k in 1..=n {
            pts.push(add(w[0], scale(d, k as f64 / n as f64)));
        }
    }
    pts
}

/// Point within `radius` of the axis at the hole, as a perpendicular offset.
fn hole_offset(rng: &mut ChaCha8Rng, axis: Point3, radius: f64) -> Point3 {
    let helper = if axis[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let u = {
        let v = sub(helper, scale(axis, dot(helper, axis)));
        scale(v, 1.0 / norm(v))
    };
    let w = [
        axis[1] * u[2] - axis[2] * u[1],
        axis[2] * u[0] - axis[0] * u[2],
        axis[0] * u[1] - axis[1] * u[0],
    ];
    let r = radius * rng.gen::<f64>().sqrt();
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    add(scale(u, r * phi.cos()), scale(w, r * phi.sin()))
}

fn family_path(spec: &PhantomSpec, family: Family, rng: &mut ChaCha8Rng) -> Vec<Point3> {
    let a = &spec.muscle_a;
    let b = &spec.muscle_b;
    let off = hole_offset(rng, spec.axis(), 0.16 * spec.hole_radius());
    let top = add(spec.hole_top(), off);
    let bottom = add(spec.hole_bottom(), off);
    let soft = [1.5, 1.0, 1.0];
    let front_y = a.center[1] + a.radii[1] + 8.0;
    let behind_y = a.center[1] - a.radii[1] - 6.0;
    let x = a.center[0];
    let exit_z = b.center[2] - 4.0;
    match family {
        Family::Positive => {
            let mut w = vec![top, bottom];
            w.push(jitter(rng, [x, front_y, a.center[2] + 4.0], soft));
            w.push(jitter(rng, [x, front_y, a.center[2] - 6.0], soft));
            w.push(jitter(rng, [x, front_y, exit_z], soft));
            w
        }
        Family::MissHole => {
            let side = spec.torus_major + spec.torus_minor + 4.0;
            let lateral = add(spec.hole_top(), [side, 0.0, 0.0]);
            let lateral_low = add(spec.hole_bottom(), [side, 0.0, 0.0]);
            vec![
                jitter(rng, lateral, soft),
                jitter(rng, lateral_low, soft),
                jitter(rng, [x, front_y, a.center[2] + 4.0], soft),
                jitter(rng, [x, front_y, a.center[2] - 6.0], soft),
                jitter(rng, [x, front_y, exit_z], soft),
            ]
        }
        Family::WrongSide => vec![
            top,
            bottom,
            jitter(rng, [x, behind_y, a.center[2] + 10.0], soft),
            jitter(rng, [x, behind_y, a.center[2] - 6.0], soft),
            jitter(rng, [x, behind_y, exit_z], soft),
        ],
        Family::ReversedOrder => {
            let start = [b.center[0], b.center[1], spec.hole_top()[2] + 2.0];
            vec![
                jitter(rng, start, soft),
                jitter(rng, [b.center[0], b.center[1], spec.hole_bottom()[2] - 4.0], soft),
                jitter(rng, [x, front_y + 2.0, a.center[2]], soft),
                jitter(rng, [x, front_y + 2.0, a.center[2] - 6.0], soft),
                jitter(rng, [x, spec.torus_center[1], a.center[2] + 8.0], soft),
                bottom,
                add(spec.torus_center, add(off, scale(spec.axis(), 12.0))),
            ]
        }
    }
}

pub fn generate(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let g = spec.geometry()?;
    let n = g.len();
    let mut labels = vec![0u32; n];
    let mut hole = vec![0u32; n];
    for (i, (l, h)) in labels.iter_mut().zip(hole.iter_mut()).enumerate() {
        let p = g.world_of_index(i);
        if spec.in_torus(p) {
            *l = CANAL_LABEL;
        } else if spec.muscle_a.contains(p) {
            *l = MUSCLE_A_LABEL;
        } else if spec.muscle_b.contains(p) {
            *l = MUSCLE_B_LABEL;
        }
        if spec.in_hole(p) {
            *h = 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let decoy_families = [Family::MissHole, Family::WrongSide, Family::ReversedOrder];
    let families: Vec<Family> = std::iter::repeat_n(Family::Positive, spec.positives)
        .chain((0..spec.decoys).map(|i| decoy_families[i % 3]))
        .collect();
    let mut ids: Vec<FiberId> = (1..=families.len() as FiberId).collect();
    ids.shuffle(&mut rng);
    let mut fibers = Vec::with_capacity(families.len());
    for (&family, &id) in families.iter().zip(&ids) {
        let waypoints = family_path(spec, family, &mut rng);
        fibers.push((Fiber::new(id, polyline(&waypoints, 1.0))?, family));
    }
    fibers.shuffle(&mut rng);

    Ok(Phantom {
        labels: LabelVolume::new(g.clone(), labels)?,
        hole: LabelVolume::new(g, hole)?,
        fibers,
        spec: spec.clone(),
    })
}

pub const LABELS_FILE: &str = "phantom.lvol";
pub const HOLE_FILE: &str = "canal_hole.lvol";
pub const SCENE_FILE: &str = "phantom.scene";
pub const QUERY_FILE: &str = "phantom.fq";
pub const FIBERS_FILE: &str = "fibers.fib";
pub const TRUTH_FILE: &str = "ground_truth.tsv";
pub const STRUCTURES_FILE: &str = "structures.tsv";

impl Phantom {
    pub fn scene_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# synthetic phantom, seed {}", self.spec.seed);
        let _ = writeln!(s, "structure Canal labels {LABELS_FILE} {CANAL_LABEL}");
        let _ = writeln!(s, "structure MuscleA labels {LABELS_FILE} {MUSCLE_A_LABEL}");
        let _ = writeln!(s, "structure MuscleB labels {LABELS_FILE} {MUSCLE_B_LABEL}");
        let _ = writeln!(s, "structure CanalHole hole {HOLE_FILE}");
        let _ = writeln!(s, "frame x=left y=anterior z=superior");
        s
    }

    pub fn truth_text(&self) -> String {
        let mut s = String::from("fiber_id\tfamily\texpected_accepted\n");
        for (f, fam) in &self.fibers {
            let _ = writeln!(s, "{}\t{}\t{}", f.id(), fam.name(), fam.expected());
        }
        s
    }

    pub fn structures_text(&self) -> String {
        let mut s = String::from("name\tlabel\tvoxels\n");
        for (name, label) in [("Canal", CANAL_LABEL), ("MuscleA", MUSCLE_A_LABEL), ("MuscleB", MUSCLE_B_LABEL)] {
            let _ = writeln!(s, "{name}\t{label}\t{}", self.labels.count(label));
        }
        let _ = writeln!(s, "CanalHole\t-\t{}", self.hole.count(1));
        s
    }

    /// Writes the bundle into `dir`, creating it if needed.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, bytes: &[u8]| -> Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
        };
        let mut buf = Vec::new();
        write_labels(&self.labels, &mut buf, Encoding::Binary).map_err(|e| Error::io(dir, e))?;
        put(LABELS_FILE, &buf)?;
        buf.clear();
        write_labels(&self.hole, &mut buf, Encoding::Binary).map_err(|e| Error::io(dir, e))?;
        put(HOLE_FILE, &buf)?;
        let mut fw = FiberWriter::new(Vec::new()).map_err(|e| Error::io(dir, e))?;
        for (f, _) in &self.fibers {
            fw.write(f).map_err(|e| Error::io(dir, e))?;
        }
        let mut fib = fw.finish().map_err(|e| Error::io(dir, e))?;
        fib.flush().map_err(|e| Error::io(dir, e))?;
        put(FIBERS_FILE, &fib)?;
        put(SCENE_FILE, self.scene_text().as_bytes())?;
        put(QUERY_FILE, QUERY.as_bytes())?;
        put(TRUTH_FILE, self.truth_text().as_bytes())?;
        put(STRUCTURES_FILE, self.structures_text().as_bytes())
    }
}
