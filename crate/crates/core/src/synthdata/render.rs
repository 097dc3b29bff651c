use rand::Rng;

use crate::image::{Image, Rgb};
use crate::rng::StreamRng;
use rand::SeedableRng;

/// Base half-extent of every shape as a fraction of the image side.
const HALF_EXTENT: f64 = 0.28;
const MAX_SHIFT: f64 = 2.0;
const SCALE_JITTER: f64 = 0.2;
const NOISE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Square,
    Disk,
    Triangle,
    Cross,
}

impl Shape {
    pub const ALL: [Shape; 4] = [Shape::Square, Shape::Disk, Shape::Triangle, Shape::Cross];

    /// Whether pixel centre `(x, y)` lies inside a shape centred at
    /// `(cx, cy)` with half-extent `r`.
    fn contains(self, x: f64, y: f64, cx: f64, cy: f64, r: f64) -> bool {
        let (dx, dy) = (x - cx, y - cy);
        match self {
            Shape::Square => dx.abs() <= r && dy.abs() <= r,
            Shape::Disk => dx * dx + dy * dy <= r * r,
            // apex at the top, base of width 2r at the bottom
            Shape::Triangle => dy.abs() <= r && dx.abs() <= (dy + r) / 2.0,
            Shape::Cross => {
                let arm = r / 3.0;
                (dx.abs() <= arm && dy.abs() <= r) || (dy.abs() <= arm && dx.abs() <= r)
            }
        }
    }
}

/// Translation (pixels) and scale of a rendered shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub dx: f64,
    pub dy: f64,
    pub scale: f64,
}

impl Placement {
    pub const CENTERED: Placement = Placement { dx: 0.0, dy: 0.0, scale: 1.0 };

    /// ±2 px translation, ±20% scale.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Placement {
            dx: rng.gen_range(-MAX_SHIFT..=MAX_SHIFT),
            dy: rng.gen_range(-MAX_SHIFT..=MAX_SHIFT),
            scale: rng.gen_range(1.0 - SCALE_JITTER..=1.0 + SCALE_JITTER),
        }
    }
}

/// Row-major inside/outside mask of `shape` on a `size × size` grid.
pub fn shape_mask(shape: Shape, size: usize, placement: Placement) -> Vec<bool> {
    let c = (size as f64 - 1.0) / 2.0;
    let (cx, cy) = (c + placement.dx, c + placement.dy);
    let r = HALF_EXTENT * size as f64 * placement.scale;
    let mut mask = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            mask.push(shape.contains(x as f64, y as f64, cx, cy, r));
        }
    }
    mask
}

/// Render with an explicit placement. `noise` adds Uniform(±0.05) per
/// channel, clamped to `[0, 1]`; `None` renders the clean image.
pub fn render_with(
    shape: Shape,
    fg: Rgb,
    bg: Rgb,
    size: usize,
    placement: Placement,
    noise: Option<&mut StreamRng>,
) -> Image {
    let mask = shape_mask(shape, size, placement);
    let mut img = Image::filled(size, size, bg);
    for (i, inside) in mask.into_iter().enumerate() {
        if inside {
            img.data_mut()[i * 3..i * 3 + 3].copy_from_slice(&fg);
        }
    }
    if let Some(rng) = noise {
        for v in img.data_mut() {
            *v += rng.gen_range(-NOISE..NOISE);
        }
        img.clamp_unit();
    }
    img
}

/// 16×16 rendering with placement jitter and pixel noise drawn from `jitter_seed`.
pub fn render_shape(class: usize, fg: Rgb, bg: Rgb, jitter_seed: u64) -> Image {
    let mut rng = StreamRng::seed_from_u64(jitter_seed);
    let placement = Placement::random(&mut rng);
    render_with(Shape::ALL[class % Shape::ALL.len()], fg, bg, 16, placement, Some(&mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centred_square_covers_its_analytic_area() {
        let size = 16;
        let img = render_with(Shape::Square, [1.0, 0.0, 0.0], [0.0; 3], size, Placement::CENTERED, None);
        // integers in [c - r, c + r], squared
        let c = 7.5;
        let r = HALF_EXTENT * 16.0;
        let side = ((c + r).floor() - (c - r).ceil() + 1.0) as usize;
        let red = img.data().chunks_exact(3).filter(|p| p == &[1.0, 0.0, 0.0]).count();
        assert_eq!(red, side * side);
        assert_eq!(side, 8);
        // axis-aligned: every red row has the same extent
        let rows: Vec<usize> =
            (0..size).map(|y| (0..size).filter(|&x| img.pixel(y, x)[0] == 1.0).count()).filter(|&n| n > 0).collect();
        assert_eq!(rows, vec![side; side]);
    }

    #[test]
    fn equal_colors_give_constant_image_plus_noise() {
        let col = [0.4, 0.4, 0.4];
        let img = render_shape(2, col, col, 11);
        assert!(img.data().iter().all(|v| (v - 0.4).abs() <= NOISE));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = render_shape(1, [1.0, 0.5, 0.0], [0.0; 3], 99);
        let b = render_shape(1, [1.0, 0.5, 0.0], [0.0; 3], 99);
        assert_eq!(a, b);
        assert_ne!(a, render_shape(1, [1.0, 0.5, 0.0], [0.0; 3], 100));
    }

    #[test]
    fn shapes_have_distinct_masks_and_stay_inside_the_frame() {
        let masks: Vec<Vec<bool>> = Shape::ALL.iter().map(|&s| shape_mask(s, 16, Placement::CENTERED)).collect();
        for i in 0..4 {
            let area = masks[i].iter().filter(|&&b| b).count();
            assert!(area > 20, "shape {i} area {area}");
            for j in i + 1..4 {
                assert_ne!(masks[i], masks[j]);
            }
        }
        // extreme placement never leaves the image
        let p = Placement { dx: 2.0, dy: 2.0, scale: 1.2 };
        let c = 7.5 + 2.0;
        let r = HALF_EXTENT * 16.0 * 1.2;
        assert!(c + r < 16.0);
        let _ = shape_mask(Shape::Square, 16, p);
    }
}
