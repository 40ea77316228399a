//! Deterministic 16x16 scene renderer.
//!
//! Factor roles, in order: background intensity, central square half-width,
//! square intensity, top bar thickness, top bar horizontal offset and the
//! radius of a quarter disk in the bottom-right corner. Objects are painted in
//! that order and may overlap. Object intensities never depend on the
//! background, so a factor always moves pixels in the same direction.

use crate::numcore::Matrix;

pub const IMAGE_SIDE: usize = 16;

/// Rows and columns `[SQUARE_LO, SQUARE_HI)` bound the central square at its largest.
pub const SQUARE_LO: usize = 4;
pub const SQUARE_HI: usize = 12;
const SQUARE_MAX_HALF: f64 = 4.0;
const BAR_MAX_THICKNESS: f64 = 8.0;
const BAR_LENGTH: f64 = 8.0;
const BAR_MAX_OFFSET: f64 = 8.0;
const DOT_MAX_RADIUS: f64 = 8.0;
const DOT_SUBSAMPLES: usize = 16;

fn overlap(lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    (hi.min(b) - lo.max(a)).max(0.0)
}

fn square_intensity(level: f64) -> f64 {
    0.25 + 0.5 * level
}

const OBJECT_VALUE: f64 = 1.0;

fn dot_coverage(r: usize, c: usize, radius: f64) -> f64 {
    if radius <= 0.0 {
        return 0.0;
    }
    let corner = IMAGE_SIDE as f64;
    let step = 1.0 / DOT_SUBSAMPLES as f64;
    let mut inside = 0usize;
    for i in 0..DOT_SUBSAMPLES {
        let y = r as f64 + (i as f64 + 0.5) * step;
        for j in 0..DOT_SUBSAMPLES {
            let x = c as f64 + (j as f64 + 0.5) * step;
            if (corner - y).hypot(corner - x) < radius {
                inside += 1;
            }
        }
    }
    inside as f64 / (DOT_SUBSAMPLES * DOT_SUBSAMPLES) as f64
}

/// Renders a factor vector (entries in `[0, 1]`); factors beyond the sixth are ignored
/// and missing ones count as zero.
pub fn render(factors: &[f64]) -> Matrix {
    let f = |k: usize| factors.get(k).copied().unwrap_or(0.0).clamp(0.0, 1.0);
    let background = f(0);
    let half = SQUARE_MAX_HALF * f(1);
    let square_value = square_intensity(f(2));
    let thickness = BAR_MAX_THICKNESS * f(3);
    let bar_left = BAR_MAX_OFFSET * f(4);
    let radius = DOT_MAX_RADIUS * f(5);
    let center = IMAGE_SIDE as f64 / 2.0;

    Matrix::from_fn(IMAGE_SIDE, IMAGE_SIDE, |r, c| {
        let (y, x) = (r as f64, c as f64);
        let square = overlap(y, y + 1.0, center - half, center + half)
            * overlap(x, x + 1.0, center - half, center + half);
        let bar = overlap(y, y + 1.0, 0.0, thickness) * overlap(x, x + 1.0, bar_left, bar_left + BAR_LENGTH);
        let dot = if r + 9 >= IMAGE_SIDE && c + 9 >= IMAGE_SIDE {
            dot_coverage(r, c, radius)
        } else {
            0.0
        };
        // Painter's order: square, then bar, then dot.
        let mut v = background;
        v += square * (square_value - v);
        v += bar * (OBJECT_VALUE - v);
        v += dot * (OBJECT_VALUE - v);
        v.clamp(0.0, 1.0)
    })
}
