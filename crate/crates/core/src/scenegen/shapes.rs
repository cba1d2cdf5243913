//! Parametric class clouds: each fine class is a composition of a few
//! surface primitives with randomized proportions. Units are millimeters,
//! y is up and the object stands on `y = 0`, centered on x = z = 0.

use std::f64::consts::TAU;

use rand::Rng;

use crate::classifier::FineClass;
use crate::depthio::{Point3, PointCloud};

/// A planar parallelogram `origin + s*e1 + t*e2`, `s, t` in `[0, 1]`.
#[derive(Debug, Clone, Copy)]
struct Quad {
    origin: [f64; 3],
    e1: [f64; 3],
    e2: [f64; 3],
}

/// Lateral surface of a (possibly tapered) vertical elliptic cylinder.
#[derive(Debug, Clone, Copy)]
struct Tube {
    center: [f64; 2],
    radius_bottom: [f64; 2],
    radius_top: [f64; 2],
    y0: f64,
    y1: f64,
}

#[derive(Debug, Clone, Copy)]
enum Patch {
    Quad(Quad),
    Tube(Tube),
    Disc { center: [f64; 3], radius: [f64; 2] },
}

impl Patch {
    fn area(&self) -> f64 {
        match self {
            Patch::Quad(q) => {
                let c = cross(q.e1, q.e2);
                (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
            }
            Patch::Tube(t) => {
                let r = (t.radius_bottom[0] + t.radius_bottom[1] + t.radius_top[0] + t.radius_top[1]) / 4.0;
                TAU * r * (t.y1 - t.y0).abs()
            }
            Patch::Disc { radius, .. } => std::f64::consts::PI * radius[0] * radius[1],
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> Point3 {
        match self {
            Patch::Quad(q) => {
                let s: f64 = rng.random();
                let t: f64 = rng.random();
                Point3::new(
                    q.origin[0] + s * q.e1[0] + t * q.e2[0],
                    q.origin[1] + s * q.e1[1] + t * q.e2[1],
                    q.origin[2] + s * q.e1[2] + t * q.e2[2],
                )
            }
            Patch::Tube(t) => {
                let a = rng.random::<f64>() * TAU;
                let f: f64 = rng.random();
                let rx = t.radius_bottom[0] + f * (t.radius_top[0] - t.radius_bottom[0]);
                let rz = t.radius_bottom[1] + f * (t.radius_top[1] - t.radius_bottom[1]);
                Point3::new(t.center[0] + rx * a.cos(), t.y0 + f * (t.y1 - t.y0), t.center[1] + rz * a.sin())
            }
            Patch::Disc { center, radius } => {
                let a = rng.random::<f64>() * TAU;
                let r = rng.random::<f64>().sqrt();
                Point3::new(center[0] + radius[0] * r * a.cos(), center[1], center[2] + radius[1] * r * a.sin())
            }
        }
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[derive(Default)]
struct Shape {
    patches: Vec<Patch>,
}

impl Shape {
    fn quad(&mut self, origin: [f64; 3], e1: [f64; 3], e2: [f64; 3]) {
        self.patches.push(Patch::Quad(Quad { origin, e1, e2 }));
    }

    /// Horizontal rectangle at height `y`.
    fn flat(&mut self, x0: f64, x1: f64, z0: f64, z1: f64, y: f64) {
        self.quad([x0, y, z0], [x1 - x0, 0.0, 0.0], [0.0, 0.0, z1 - z0]);
    }

    /// Surface of an axis-aligned cuboid; the bottom face is left out when it
    /// rests on the floor.
    fn cuboid(&mut self, lo: [f64; 3], hi: [f64; 3]) {
        let [x0, y0, z0] = lo;
        let [x1, y1, z1] = hi;
        let (dx, dy, dz) = (x1 - x0, y1 - y0, z1 - z0);
        self.flat(x0, x1, z0, z1, y1);
        if y0 > 1.0 {
            self.flat(x0, x1, z0, z1, y0);
        }
        self.quad([x0, y0, z0], [dx, 0.0, 0.0], [0.0, dy, 0.0]);
        self.quad([x0, y0, z1], [dx, 0.0, 0.0], [0.0, dy, 0.0]);
        self.quad([x0, y0, z0], [0.0, 0.0, dz], [0.0, dy, 0.0]);
        self.quad([x1, y0, z0], [0.0, 0.0, dz], [0.0, dy, 0.0]);
    }

    fn legs(&mut self, x0: f64, x1: f64, z0: f64, z1: f64, top: f64, size: f64) {
        for (x, z) in [(x0, z0), (x1 - size, z0), (x0, z1 - size), (x1 - size, z1 - size)] {
            self.cuboid([x, 0.0, z], [x + size, top, z + size]);
        }
    }

    fn sample(&self, n: usize, rng: &mut impl Rng) -> PointCloud {
        let areas: Vec<f64> = self.patches.iter().map(Patch::area).collect();
        let total: f64 = areas.iter().sum();
        let mut cumulative = Vec::with_capacity(areas.len());
        let mut acc = 0.0;
        for a in &areas {
            acc += a / total;
            cumulative.push(acc);
        }
        (0..n)
            .map(|_| {
                let r: f64 = rng.random();
                let i = cumulative.partition_point(|&c| c < r).min(self.patches.len() - 1);
                self.patches[i].sample(rng)
            })
            .collect()
    }
}

fn centered(w: f64, d: f64) -> (f64, f64, f64, f64) {
    (-w / 2.0, w / 2.0, -d / 2.0, d / 2.0)
}

fn chair(rng: &mut impl Rng) -> Shape {
    let mut s = Shape::default();
    let w = rng.random_range(400.0..550.0);
    let d = rng.random_range(400.0..550.0);
    let seat = rng.random_range(400.0..480.0);
    let th = rng.random_range(40.0..60.0);
    let back = rng.random_range(350.0..500.0);
    let leg = rng.random_range(30.0..50.0);
    let (x0, x1, z0, z1) = centered(w, d);
    s.legs(x0, x1, z0, z1, seat - th, leg);
    s.cuboid([x0, seat - th, z0], [x1, seat, z1]);
    s.cuboid([x0, seat, z1 - th], [x1, seat + back, z1]);
    s
}

fn stool(rng: &mut impl Rng) -> Shape {
    let mut s = Shape::default();
    let r = rng.random_range(150.0..220.0);
    let h = rng.random_range(450.0..750.0);
    let th = rng.random_range(30.0..50.0);
    let leg = rng.random_range(25.0..40.0);
    s.patches.push(Patch::Disc { center: [0.0, h, 0.0], radius: [r, r] });
    s.patches.push(Patch::Tube(Tube {
        center: [0.0, 0.0],
        radius_bottom: [r, r],
        radius_top: [r, r],
        y0: h - th,
        y1: h,
    }));
    s.patches.push(Patch::Disc { center: [0.0, h - th, 0.0], radius: [r, r] });
    let k = 0.75 * r;
    for (x, z) in [(k, 0.0), (-k / 2.0, k * 0.87), (-k / 2.0, -k * 0.87)] {
        s.cuboid([x - leg / 2.0, 0.0, z - leg / 2.0], [x + leg / 2.0, h - th, z + leg / 2.0]);
    }
    s
}

fn bed(rng: &mut impl Rng) -> Shape {
    let mut s = Shape::default();
    let w = rng.random_range(1400.0..1900.0);
    let d = rng.random_range(1900.0..2200.0);
    let h = rng.random_range(400.0..600.0);
    let head = rng.random_range(800.0..1200.0);
    let (x0, x1, z0, z1) = centered(w, d);
    s.cuboid([x0, 0.0, z0], [x1, h, z1 - 60.0]);
    s.cuboid([x0, 0.0, z1 - 60.0], [x1, head, z1]);
    s
}

fn sofa(rng: &mut impl Rng) -> Shape {
    let mut s = Shape::default();
    let w = rng.random_range(1600.0..2200.0);
    let d = rng.random_range(800.0..950.0);
    let seat = rng.random_range(400.0..450.0);
    let back = rng.random_range(750.0..900.0);
    let arm_h = rng.random_range(550.0..650.0);
    let (x0, x1, z0, z1) = centered(w, d);
    s.cuboid([x0 + 150.0, 0.0, z0], [x1 - 150.0, seat, z1 - 200.0]);
    s.cuboid([x0, 0.0, z1 - 200.0], [x1, back, z1]);
    s.cuboid([x0, 0.0, z0], [x0 + 150.0, arm_h, z1 - 200.0]);
    s.cuboid([x1 - 150.0, 0.0, z0], [x1, arm_h, z1 - 200.0]);
    s
}

fn bench(rng: &mut impl Rng) -> Shape {
    let mut s = Shape::default();
    let w = rng.random_range(1200.0..1800.0);
    let d = rng.random_range(300.0..400.0);
    let h = rng.random_range(400.0..480.0);
    let (x0, x1, z0, z1) = centered(w, d);
    s.cuboid([x0, h - 50.0, z0], [x1, h, z1]);
    for x in [x0 + 100.0, x1 - 150.0] {
        s.cuboid([x, 0.0, z0 + 20.0], [x + 50.0, h - 50.0, z1 - 20.0]);
    }
    s
}

fn table(rng: &mut impl Rng) -> Shape {
    let mut s = Shape::default();
    let w = rng.random_range(900.0..1600.0);
    let d = rng.random_range(700.0..1000.0);
    let h = rng.random_range(700.0..780.0);
    let leg = rng.random_range(40.0..70.0);
    let (x0, x1, z0, z1) = centered(w, d);
    s.cuboid([x0, h - 40.0, z0], [x1, h, z1]);
    s.legs(x0 + 30.0, x1 - 30.0, z0 + 30.0, z1 - 30.0, h - 40.0, leg);
    s
}

fn desk(rng: &mut impl Rng) -> Shape {
    let mut s = Shape::default();
    let w = rng.random_range(1100.0..1600.0);
    let d = rng.random_range(600.0..800.0);
    let h = rng.random_range(720.0..760.0);
    let ped = rng.random_range(350.0..450.0);
    let (x0, x1, z0, z1) = centered(w, d);
    s.cuboid([x0, h - 35.0, z0], [x1, h, z1]);
    s.cuboid([x0, 0.0, z0 + 20.0], [x0 + ped, h - 35.0, z1]);
    s.cuboid([x1 - 40.0, 0.0, z0 + 20.0], [x1, h - 35.0, z1]);
    s
}

fn night_stand(rng: &mut impl Rng) -> Shape {
    let mut s = Shape::default();
    let w = rng.random_range(400.0..550.0);
    let d = rng.random_range(350.0..450.0);
    let h = rng.random_range(500.0..650.0);
    let gap = rng.random_range(150.0..220.0);
    let (x0, x1, z0, z1) = centered(w, d);
    s.cuboid([x0 - 30.0, h - 30.0, z0 - 30.0], [x1 + 30.0, h, z1 + 30.0]);
    s.cuboid([x0, gap, z0], [x1, h - 30.0, z1]);
    s.legs(x0, x1, z0, z1, gap, 35.0);
    s
}

fn dresser(rng: &mut impl Rng) -> Shape {
    let mut s = Shape::default();
    let w = rng.random_range(1000.0..1600.0);
    let d = rng.random_range(450.0..550.0);
    let h = rng.random_range(800.0..1100.0);
    let (x0, x1, z0, z1) = centered(w, d);
    s.cuboid([x0, 0.0, z0], [x1, h, z1]);
    // drawer fronts stand slightly proud of the body
    let rows = 3 + (h > 950.0) as usize;
    let pitch = (h - 80.0) / rows as f64;
    for r in 0..rows {
        let y = 60.0 + r as f64 * pitch;
        s.quad([x0 + 30.0, y, z0 - 20.0], [w - 60.0, 0.0, 0.0], [0.0, pitch - 25.0, 0.0]);
    }
    s
}

fn wardrobe(rng: &mut impl Rng) -> Shape {
    let mut s = Shape::default();
    let w = rng.random_range(900.0..1400.0);
    let d = rng.random_range(550.0..650.0);
    let h = rng.random_range(1800.0..2200.0);
    let (x0, x1, z0, z1) = centered(w, d);
    s.cuboid([x0, 0.0, z0], [x1, h, z1]);
    s
}

fn bookshelf(rng: &mut impl Rng) -> Shape {
    let mut s = Shape::default();
    let w = rng.random_range(700.0..1000.0);
    let d = rng.random_range(250.0..350.0);
    let h = rng.random_range(1500.0..2000.0);
    let (x0, x1, z0, z1) = centered(w, d);
    let t = 25.0;
    s.cuboid([x0, 0.0, z0], [x0 + t, h, z1]);
    s.cuboid([x1 - t, 0.0, z0], [x1, h, z1]);
    s.quad([x0, 0.0, z1], [w, 0.0, 0.0], [0.0, h, 0.0]);
    let shelves = rng.random_range(4..7);
    for i in 0..=shelves {
        let y = i as f64 * (h - t) / shelves as f64;
        s.cuboid([x0 + t, y, z0], [x1 - t, y + t, z1]);
    }
    s
}

fn bathtub(rng: &mut impl Rng) -> Shape {
    let mut s = Shape::default();
    let w = rng.random_range(1500.0..1800.0);
    let d = rng.random_range(700.0..800.0);
    let h = rng.random_range(500.0..600.0);
    let t = 60.0;
    let (x0, x1, z0, z1) = centered(w, d);
    let (dx, dz) = (w, d);
    // outer walls
    s.quad([x0, 0.0, z0], [dx, 0.0, 0.0], [0.0, h, 0.0]);
    s.quad([x0, 0.0, z1], [dx, 0.0, 0.0], [0.0, h, 0.0]);
    s.quad([x0, 0.0, z0], [0.0, 0.0, dz], [0.0, h, 0.0]);
    s.quad([x1, 0.0, z0], [0.0, 0.0, dz], [0.0, h, 0.0]);
    // rim
    s.flat(x0, x1, z0, z0 + t, h);
    s.flat(x0, x1, z1 - t, z1, h);
    s.flat(x0, x0 + t, z0 + t, z1 - t, h);
    s.flat(x1 - t, x1, z0 + t, z1 - t, h);
    // basin
    let (ix0, ix1, iz0, iz1) = (x0 + t, x1 - t, z0 + t, z1 - t);
    let floor = 80.0;
    s.flat(ix0, ix1, iz0, iz1, floor);
    s.quad([ix0, floor, iz0], [ix1 - ix0, 0.0, 0.0], [0.0, h - floor, 0.0]);
    s.quad([ix0, floor, iz1], [ix1 - ix0, 0.0, 0.0], [0.0, h - floor, 0.0]);
    s.quad([ix0, floor, iz0], [0.0, 0.0, iz1 - iz0], [0.0, h - floor, 0.0]);
    s.quad([ix1, floor, iz0], [0.0, 0.0, iz1 - iz0], [0.0, h - floor, 0.0]);
    s
}

fn toilet(rng: &mut impl Rng) -> Shape {
    let mut s = Shape::default();
    let r = rng.random_range(180.0..220.0);
    let bowl_h = rng.random_range(380.0..430.0);
    let tank_w = rng.random_range(380.0..450.0);
    let tank_d = rng.random_range(180.0..220.0);
    let tank_top = rng.random_range(750.0..850.0);
    let zc = -tank_d / 2.0;
    s.patches.push(Patch::Tube(Tube {
        center: [0.0, zc],
        radius_bottom: [0.55 * r, 0.7 * r],
        radius_top: [r, 1.3 * r],
        y0: 0.0,
        y1: bowl_h,
    }));
    // inner bowl
    s.patches.push(Patch::Tube(Tube {
        center: [0.0, zc],
        radius_bottom: [0.3 * r, 0.4 * r],
        radius_top: [0.8 * r, 1.1 * r],
        y0: bowl_h - 250.0,
        y1: bowl_h,
    }));
    let z_back = zc + 1.3 * r - 20.0;
    s.cuboid([-tank_w / 2.0, bowl_h - 60.0, z_back], [tank_w / 2.0, tank_top, z_back + tank_d]);
    s.cuboid([-90.0, 0.0, z_back - 10.0], [90.0, bowl_h - 60.0, z_back + tank_d * 0.6]);
    s
}

fn stairs_shape(rng: &mut impl Rng) -> Shape {
    let steps = rng.random_range(3..=6);
    let rise = rng.random_range(150.0..200.0);
    let run = rng.random_range(250.0..300.0);
    let width = rng.random_range(800.0..1200.0);
    staircase(steps, rise, run, width, 1.0)
}

/// Staircase climbing away from the viewer along +z (`sign = 1`) or
/// descending below the floor (`sign = -1`).
fn staircase(steps: usize, rise: f64, run: f64, width: f64, sign: f64) -> Shape {
    let mut s = Shape::default();
    let (x0, x1) = (-width / 2.0, width / 2.0);
    let z_start = -(steps as f64) * run / 2.0;
    for i in 0..steps {
        let z = z_start + i as f64 * run;
        let y_tread = sign * (i as f64 + 1.0) * rise;
        let y_prev = sign * i as f64 * rise;
        s.quad([x0, y_prev, z], [width, 0.0, 0.0], [0.0, y_tread - y_prev, 0.0]);
        s.flat(x0, x1, z, z + run, y_tread);
        if sign > 0.0 {
            // stringers: side faces of the solid step column
            for x in [x0, x1] {
                s.quad([x, 0.0, z], [0.0, 0.0, run], [0.0, y_tread, 0.0]);
            }
        }
    }
    s
}

fn door(rng: &mut impl Rng) -> Shape {
    let mut s = Shape::default();
    let w = rng.random_range(800.0..950.0);
    let h = rng.random_range(2000.0..2150.0);
    let (x0, x1, z0, z1) = centered(w, 50.0);
    s.cuboid([x0, 0.0, z0], [x1, h, z1]);
    s.cuboid([x0 - 60.0, 0.0, z0 - 20.0], [x0, h + 60.0, z1 + 20.0]);
    s.cuboid([x1, 0.0, z0 - 20.0], [x1 + 60.0, h + 60.0, z1 + 20.0]);
    s.cuboid([x0 - 60.0, h, z0 - 20.0], [x1 + 60.0, h + 60.0, z1 + 20.0]);
    s
}

fn window(rng: &mut impl Rng) -> Shape {
    let mut s = Shape::default();
    let w = rng.random_range(800.0..1400.0);
    let h = rng.random_range(900.0..1300.0);
    let sill = rng.random_range(800.0..1000.0);
    let f = 60.0;
    let (x0, x1, z0, z1) = centered(w, 80.0);
    s.cuboid([x0, sill, z0], [x1, sill + f, z1]);
    s.cuboid([x0, sill + h - f, z0], [x1, sill + h, z1]);
    s.cuboid([x0, sill, z0], [x0 + f, sill + h, z1]);
    s.cuboid([x1 - f, sill, z0], [x1, sill + h, z1]);
    s.cuboid([-f / 2.0, sill, z0], [f / 2.0, sill + h, z1]);
    s.cuboid([x0, sill + h / 2.0 - f / 2.0, z0], [x1, sill + h / 2.0 + f / 2.0, z1]);
    s
}

fn shape_for(class: FineClass, rng: &mut impl Rng) -> Shape {
    match class {
        FineClass::Chair => chair(rng),
        FineClass::Stool => stool(rng),
        FineClass::Bed => bed(rng),
        FineClass::Sofa => sofa(rng),
        FineClass::Bench => bench(rng),
        FineClass::Table => table(rng),
        FineClass::Desk => desk(rng),
        FineClass::NightStand => night_stand(rng),
        FineClass::Dresser => dresser(rng),
        FineClass::Wardrobe => wardrobe(rng),
        FineClass::Bookshelf => bookshelf(rng),
        FineClass::Bathtub => bathtub(rng),
        FineClass::Toilet => toilet(rng),
        FineClass::Stairs => stairs_shape(rng),
        FineClass::Door => door(rng),
        FineClass::Window => window(rng),
    }
}

/// Surface-sampled cloud of a randomized instance of `class`, with a random
/// point count in `256..=2048`.
pub fn sample_box_cloud(class: FineClass, rng: &mut impl Rng) -> PointCloud {
    let n = rng.random_range(256..=2048);
    sample_box_cloud_with_count(class, n, rng)
}

pub fn sample_box_cloud_with_count(class: FineClass, n: usize, rng: &mut impl Rng) -> PointCloud {
    shape_for(class, rng).sample(n.max(1), rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StairsKind {
    Up,
    Down,
}

/// Staircase cloud in scene coordinates: ground level at `ground_y`, the
/// first step starting at depth `z_near` straight ahead of the camera.
pub fn stairs_cloud(kind: StairsKind, ground_y: f64, z_near: f64, n: usize, rng: &mut impl Rng) -> PointCloud {
    let steps = 4;
    let run = 280.0;
    let sign = if kind == StairsKind::Up { 1.0 } else { -1.0 };
    let shape = staircase(steps, 170.0, run, 1000.0, sign);
    let offset = z_near + steps as f64 * run / 2.0;
    let mut cloud = shape.sample(n, rng);
    for p in &mut cloud.points {
        p.y += ground_y;
        p.z += offset;
    }
    if kind == StairsKind::Down {
        // landing in front of the descent, at floor level
        for _ in 0..n / 4 {
            let x = rng.random_range(-500.0..500.0);
            let z = z_near - rng.random_range(0.0..300.0);
            cloud.points.push(Point3::new(x, ground_y, z));
        }
    }
    cloud
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_seed_same_cloud() {
        for class in FineClass::ALL {
            let a = sample_box_cloud(class, &mut ChaCha8Rng::seed_from_u64(9));
            let b = sample_box_cloud(class, &mut ChaCha8Rng::seed_from_u64(9));
            assert_eq!(a, b, "{class}");
        }
    }

    #[test]
    fn samples_are_finite_and_large_enough() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for class in FineClass::ALL {
            for _ in 0..5 {
                let c = sample_box_cloud(class, &mut rng);
                assert!(c.len() >= 256 && c.len() <= 2048);
                assert!(c.iter().all(Point3::is_finite));
            }
        }
    }

    #[test]
    fn stairs_treads_form_a_ladder() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let cloud = sample_box_cloud(FineClass::Stairs, &mut rng);
            // tread points share exact y values; risers and stringers do not
            let mut counts: std::collections::BTreeMap<u64, usize> = Default::default();
            for p in cloud.iter() {
                *counts.entry(p.y.to_bits()).or_default() += 1;
            }
            let mut levels: Vec<f64> =
                counts.iter().filter(|(_, &c)| c >= 5).map(|(&b, _)| f64::from_bits(b)).collect();
            levels.sort_by(f64::total_cmp);
            assert!(levels.len() >= 3, "{levels:?}");
            let step = levels[1] - levels[0];
            assert!(step > 0.0);
            for w in levels.windows(2) {
                assert!(((w[1] - w[0]) - step).abs() < 1e-6, "{levels:?}");
            }
        }
    }

    #[test]
    fn descending_stairs_go_below_ground() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let down = stairs_cloud(StairsKind::Down, -1000.0, 2000.0, 800, &mut rng);
        assert!(down.iter().any(|p| p.y < -1500.0));
        let up = stairs_cloud(StairsKind::Up, -1000.0, 2000.0, 800, &mut rng);
        assert!(up.iter().all(|p| p.y >= -1000.0 - 1e-9));
    }
}
