use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Phantom, SIDE_M, SIZE};
use crate::error::{Error, Result};
use crate::rng::{Stream, PHANTOM_STREAM};

const N: f64 = SIZE as f64;

/// One drawn primitive, in pixel units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Circle { cx: f64, cy: f64, radius: f64, eps: f64, sigma: f64 },
    Annulus { cx: f64, cy: f64, outer: f64, inner: f64, eps: f64, sigma: f64 },
    Rectangle { cx: f64, cy: f64, width: f64, height: f64, angle: f64, eps: f64 },
}

impl Shape {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Circle { cx, cy, radius, .. } => (x - cx).powi(2) + (y - cy).powi(2) <= radius * radius,
            Shape::Annulus { cx, cy, outer, inner, .. } => {
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                d2 <= outer * outer && d2 > inner * inner
            }
            Shape::Rectangle { cx, cy, width, height, angle, .. } => {
                let (s, c) = angle.sin_cos();
                let (dx, dy) = (x - cx, y - cy);
                let u = c * dx + s * dy;
                let v = -s * dx + c * dy;
                u.abs() <= width / 2.0 && v.abs() <= height / 2.0
            }
        }
    }

    fn values(&self) -> (f64, f64) {
        match *self {
            Shape::Circle { eps, sigma, .. } | Shape::Annulus { eps, sigma, .. } => (eps, sigma),
            Shape::Rectangle { eps, .. } => (eps, 0.0),
        }
    }
}

/// Paints shapes in order; later shapes overwrite earlier ones.
fn paint(shapes: &[Shape]) -> (Array2<f64>, Array2<f64>) {
    let mut eps = Array2::from_elem((SIZE, SIZE), 1.0);
    let mut sigma = Array2::zeros((SIZE, SIZE));
    for s in shapes {
        let (e, g) = s.values();
        for r in 0..SIZE {
            for c in 0..SIZE {
                if s.contains(c as f64 + 0.5, r as f64 + 0.5) {
                    eps[[r, c]] = e;
                    sigma[[r, c]] = g;
                }
            }
        }
    }
    (eps, sigma)
}

/// Phantom painted from explicit shapes on a vacuum background.
pub fn from_shapes(shapes: &[Shape]) -> Phantom {
    let (eps, sigma) = paint(shapes);
    Phantom { eps, sigma, meta: json!({ "shapes": shapes }) }
}

/// Family A: 2-5 horizontal layers separated by tilted, sinusoidally
/// perturbed interfaces that never cross.
pub fn gen_stratum(seed: u64) -> Phantom {
    let mut rng = Stream::new(seed, PHANTOM_STREAM);
    let n_layers = rng.int_inclusive(2, 5);
    let band = N / n_layers as f64;
    // Interface k stays within `reach` of its centre; centres are at least
    // 0.7 band apart and 2 * reach = 0.6 band, so interfaces never cross and
    // every layer keeps some thickness in every column.
    let reach = 0.3 * band;
    let mut interfaces = Vec::with_capacity(n_layers - 1);
    for k in 1..n_layers {
        let centre = band * k as f64 + rng.range(-0.15, 0.15) * band;
        let tilt_share = rng.uniform();
        let tilt = rng.range(-1.0, 1.0) * tilt_share * reach / (N / 2.0);
        let amp = (1.0 - tilt_share) * reach * rng.uniform();
        let cycles = rng.range(0.5, 3.0);
        let phase = rng.range(0.0, std::f64::consts::TAU);
        interfaces.push(json!({ "centre": centre, "tilt": tilt, "amplitude": amp, "cycles": cycles, "phase": phase }));
    }
    let depth = |k: usize, x: f64| {
        let i = &interfaces[k];
        let f = |key: &str| i[key].as_f64().unwrap();
        f("centre")
            + f("tilt") * (x - N / 2.0)
            + f("amplitude") * (std::f64::consts::TAU * f("cycles") * x / N + f("phase")).sin()
    };
    let mut layer_eps: Vec<f64> = Vec::with_capacity(n_layers);
    for k in 0..n_layers {
        let mut v = rng.range(1.5, 10.0);
        if k > 0 {
            let prev = layer_eps[k - 1];
            while (v - prev).abs() < 0.5 {
                v = rng.range(1.5, 10.0);
            }
        }
        layer_eps.push(v);
    }
    let mut eps = Array2::zeros((SIZE, SIZE));
    for c in 0..SIZE {
        let x = c as f64 + 0.5;
        for r in 0..SIZE {
            let y = r as f64 + 0.5;
            let layer = (0..n_layers - 1).filter(|&k| depth(k, x) <= y).count();
            eps[[r, c]] = layer_eps[layer];
        }
    }
    Phantom::lossless(
        eps,
        json!({ "family": "A", "n_layers": n_layers, "layer_eps": layer_eps, "interfaces": interfaces }),
    )
}

fn draw_round_shapes(rng: &mut Stream, lossy: bool) -> Vec<Shape> {
    let count = rng.int_inclusive(1, 3);
    (0..count)
        .map(|_| {
            let annulus = rng.bernoulli(0.5);
            let outer = rng.range(4.0, 40.0);
            let cx = rng.range(outer, N - outer);
            let cy = rng.range(outer, N - outer);
            let eps = rng.range(2.0, 10.0);
            let sigma = if lossy { rng.range(0.01, 0.2) } else { 0.0 };
            if annulus {
                let inner = rng.range((0.3 * outer).min(outer - 2.0), outer - 2.0);
                Shape::Annulus { cx, cy, outer, inner, eps, sigma }
            } else {
                Shape::Circle { cx, cy, radius: outer, eps, sigma }
            }
        })
        .collect()
}

/// Family B: 1-3 circles or annuli.
pub fn gen_circles(seed: u64) -> Phantom {
    let mut rng = Stream::new(seed, PHANTOM_STREAM);
    let shapes = draw_round_shapes(&mut rng, false);
    let (eps, _) = paint(&shapes);
    Phantom::lossless(eps, json!({ "family": "B", "shapes": shapes }))
}

/// Family F: family-B geometry with a conductivity per shape on the same support.
pub fn gen_lossy(seed: u64) -> Phantom {
    let mut rng = Stream::new(seed, PHANTOM_STREAM);
    let shapes = draw_round_shapes(&mut rng, true);
    let (eps, sigma) = paint(&shapes);
    Phantom { eps, sigma, meta: json!({ "family": "F", "shapes": shapes }) }
}

/// Family C: 1-3 rectangles, half of them rotated.
pub fn gen_rectangles(seed: u64) -> Phantom {
    let mut rng = Stream::new(seed, PHANTOM_STREAM);
    let count = rng.int_inclusive(1, 3);
    let shapes: Vec<Shape> = (0..count)
        .map(|_| {
            let width = rng.int_inclusive(8, 60) as f64;
            let height = rng.int_inclusive(8, 60) as f64;
            let angle = if rng.bernoulli(0.5) { rng.range(0.0, std::f64::consts::FRAC_PI_2) } else { 0.0 };
            let (s, c) = angle.sin_cos();
            let ex = (width * c + height * s) / 2.0;
            let ey = (width * s + height * c) / 2.0;
            let (cx, cy) = if angle == 0.0 {
                // Integer corners keep axis-aligned edges on pixel boundaries.
                let x0 = rng.int_inclusive(0, SIZE - width as usize) as f64;
                let y0 = rng.int_inclusive(0, SIZE - height as usize) as f64;
                (x0 + ex, y0 + ey)
            } else {
                (rng.range(ex, N - ex), rng.range(ey, N - ey))
            };
            Shape::Rectangle { cx, cy, width, height, angle, eps: rng.range(2.0, 10.0) }
        })
        .collect();
    let (eps, _) = paint(&shapes);
    Phantom::lossless(eps, json!({ "family": "C", "shapes": shapes }))
}

/// Two discs above a ring, all at `eps_fg`, on vacuum.
///
/// Discs of radius 7.5 cm at (+-14 cm, +15 cm); ring of radii 15 / 7.5 cm at
/// (0, -9 cm); coordinates relative to the image centre with `y` up.
pub fn austria_profile(eps_fg: f64) -> Result<Phantom> {
    if !(eps_fg > 1.0 && eps_fg <= 10.0) {
        return Err(Error::invalid(format!("Austria foreground permittivity must lie in (1, 10], got {eps_fg}")));
    }
    let px = SIDE_M / N;
    let mut eps = Array2::from_elem((SIZE, SIZE), 1.0);
    let discs = [(-0.14, 0.15), (0.14, 0.15)];
    let (ring_c, outer, inner, disc_r) = ((0.0, -0.09), 0.15, 0.075, 0.075);
    for r in 0..SIZE {
        let y = (N / 2.0 - r as f64 - 0.5) * px;
        for c in 0..SIZE {
            let x = (c as f64 + 0.5 - N / 2.0) * px;
            let in_disc = discs.iter().any(|&(dx, dy)| (x - dx).powi(2) + (y - dy).powi(2) <= disc_r * disc_r);
            let d2 = (x - ring_c.0).powi(2) + (y - ring_c.1).powi(2);
            if in_disc || (d2 <= outer * outer && d2 >= inner * inner) {
                eps[[r, c]] = eps_fg;
            }
        }
    }
    Ok(Phantom::lossless(
        eps,
        json!({
            "family": "austria",
            "eps_fg": eps_fg,
            "discs_m": [{ "x": -0.14, "y": 0.15, "radius": disc_r }, { "x": 0.14, "y": 0.15, "radius": disc_r }],
            "ring_m": { "x": 0.0, "y": -0.09, "outer": outer, "inner": inner },
        }),
    ))
}
