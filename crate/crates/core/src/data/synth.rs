//! Synthetic moving-object scenes with exact ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::image::RgbImage;
use super::labels::{LabelClass, LabelMask};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Rect,
    Disk,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub n_frames: usize,
    pub objects: usize,
    /// Pixels per frame.
    pub speed: f64,
    /// Object side lengths are drawn from `min_size..=max_size`.
    pub min_size: usize,
    pub max_size: usize,
    /// Alternate rectangles and disks; rectangles only when false.
    pub disks: bool,
    /// Per-pixel uniform noise amplitude in gray levels.
    pub noise: f64,
    /// Amplitude of a slow waving background pattern (dynamic background).
    pub drift: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            n_frames: 100,
            objects: 2,
            speed: 2.0,
            min_size: 10,
            max_size: 16,
            disks: true,
            noise: 6.0,
            drift: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.width == 0 || self.height == 0 || !self.width.is_multiple_of(4) || !self.height.is_multiple_of(4) {
            return bad(format!("synthetic extent {}x{} must be positive multiples of 4", self.width, self.height));
        }
        if self.min_size < 2 || self.min_size > self.max_size {
            return bad(format!("object sizes {}..={} invalid (minimum 2)", self.min_size, self.max_size));
        }
        if self.max_size > self.width.min(self.height) {
            return bad(format!(
                "object size {} exceeds the {}x{} frame",
                self.max_size, self.width, self.height
            ));
        }
        if !(self.speed.is_finite() && self.noise.is_finite() && self.drift.is_finite())
            || self.speed < 0.0
            || self.noise < 0.0
            || self.drift < 0.0
        {
            return bad("speed, noise and drift must be finite and non-negative".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Object {
    shape: Shape,
    w: usize,
    h: usize,
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    color: [f64; 3],
}

impl Object {
    fn covers(&self, px: usize, py: usize) -> bool {
        let (x0, y0) = (self.x.round() as usize, self.y.round() as usize);
        if px < x0 || py < y0 || px >= x0 + self.w || py >= y0 + self.h {
            return false;
        }
        match self.shape {
            Shape::Rect => true,
            Shape::Disk => {
                let r = self.w as f64 / 2.0;
                let dx = px as f64 + 0.5 - (x0 as f64 + r);
                let dy = py as f64 + 0.5 - (y0 as f64 + r);
                dx * dx + dy * dy <= r * r
            }
        }
    }

    fn advance(&mut self, width: usize, height: usize) {
        let step = |p: &mut f64, v: &mut f64, max: f64| {
            *p += *v;
            if *p < 0.0 {
                *p = -*p;
                *v = -*v;
            }
            if *p > max {
                *p = 2.0 * max - *p;
                *v = -*v;
            }
            *p = p.clamp(0.0, max);
        };
        step(&mut self.x, &mut self.vx, (width - self.w) as f64);
        step(&mut self.y, &mut self.vy, (height - self.h) as f64);
    }
}

/// Foreground where any object covers the pixel, Void on the 8-connected
/// one-pixel ring around the union, Background elsewhere.
fn labels_for(objects: &[Object], width: usize, height: usize) -> Result<LabelMask> {
    let fg: Vec<bool> = (0..width * height)
        .map(|i| objects.iter().any(|o| o.covers(i % width, i / width)))
        .collect();
    let classes = (0..width * height)
        .map(|i| {
            if fg[i] {
                return LabelClass::Foreground;
            }
            let (x, y) = ((i % width) as isize, (i / width) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && ny >= 0 && (nx as usize) < width && (ny as usize) < height && fg[ny as usize * width + nx as usize] {
                        return LabelClass::Void;
                    }
                }
            }
            LabelClass::Background
        })
        .collect();
    LabelMask::from_classes(width, height, classes)
}

/// Generates `n_frames` frames and their ground truth.
pub fn synth_sequence(config: &SynthConfig) -> Result<Vec<(RgbImage, LabelMask)>> {
    config.validate()?;
    let (w, h) = (config.width, config.height);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // static textured background: base colour plus a few low-frequency waves
    let base: [f64; 3] = std::array::from_fn(|_| rng.gen_range(70.0..130.0));
    let waves: Vec<(f64, f64, f64, [f64; 3])> = (0..3)
        .map(|_| {
            let fx = rng.gen_range(0.02..0.15);
            let fy = rng.gen_range(0.02..0.15);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            (fx, fy, phase, std::array::from_fn(|_| rng.gen_range(-12.0..12.0)))
        })
        .collect();
    let background: Vec<[f64; 3]> = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            std::array::from_fn(|c| {
                base[c] + waves.iter().map(|(fx, fy, ph, amp)| amp[c] * (fx * x + fy * y + ph).sin()).sum::<f64>()
            })
        })
        .collect();

    let mut objects: Vec<Object> = (0..config.objects)
        .map(|k| {
            let shape = if config.disks && k % 2 == 1 { Shape::Disk } else { Shape::Rect };
            let side = rng.gen_range(config.min_size..=config.max_size);
            let ow = side;
            let oh = if shape == Shape::Disk { side } else { rng.gen_range(config.min_size..=config.max_size) };
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let bright = rng.gen_range(0..3);
            Object {
                shape,
                w: ow,
                h: oh,
                x: rng.gen_range(0.0..=(w - ow) as f64),
                y: rng.gen_range(0.0..=(h - oh) as f64),
                vx: config.speed * angle.cos(),
                vy: config.speed * angle.sin(),
                color: std::array::from_fn(|c| if c == bright { rng.gen_range(200.0..245.0) } else { rng.gen_range(10.0..60.0) }),
            }
        })
        .collect();

    let mut out = Vec::with_capacity(config.n_frames);
    for t in 0..config.n_frames {
        let mut data = vec![0u8; 3 * w * h];
        for i in 0..w * h {
            let (x, y) = (i % w, i / w);
            let owner = objects.iter().rev().find(|o| o.covers(x, y));
            for c in 0..3 {
                let mut v = match owner {
                    Some(o) => o.color[c],
                    None => {
                        let sway = if config.drift > 0.0 {
                            config.drift * (0.3 * t as f64 + 0.4 * x as f64 + 0.25 * y as f64).sin()
                        } else {
                            0.0
                        };
                        background[i][c] + sway
                    }
                };
                if config.noise > 0.0 {
                    v += rng.gen_range(-config.noise..=config.noise);
                }
                data[3 * i + c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
        out.push((RgbImage::new(w, h, data)?, labels_for(&objects, w, h)?));
        for o in &mut objects {
            o.advance(w, h);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_rect(speed: f64, noise: f64) -> SynthConfig {
        SynthConfig {
            n_frames: 12,
            objects: 1,
            speed,
            min_size: 10,
            max_size: 10,
            disks: false,
            noise,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn static_noiseless_is_constant() {
        let seq = synth_sequence(&one_rect(0.0, 0.0)).unwrap();
        assert!(seq.windows(2).all(|p| p[0] == p[1]));
    }

    #[test]
    fn seed_determinism() {
        let cfg = SynthConfig { n_frames: 5, drift: 4.0, ..SynthConfig::default() };
        assert_eq!(synth_sequence(&cfg).unwrap(), synth_sequence(&cfg).unwrap());
        let other = SynthConfig { seed: 1, ..cfg.clone() };
        assert_ne!(synth_sequence(&cfg).unwrap(), synth_sequence(&other).unwrap());
    }

    #[test]
    fn ten_by_ten_counts() {
        for (_, labels) in synth_sequence(&one_rect(3.0, 5.0)).unwrap() {
            assert_eq!(labels.count(LabelClass::Foreground), 100);
            // ring of a 10x10 square is 12*12-100 unless clipped by the border
            let void = labels.count(LabelClass::Void);
            assert!((44 - 2 * 12 + 1..=44).contains(&void), "{void}");
        }
    }

    #[test]
    fn rejects_oversized_objects() {
        let cfg = SynthConfig { min_size: 10, max_size: 80, ..SynthConfig::default() };
        assert!(synth_sequence(&cfg).is_err());
        assert!(synth_sequence(&SynthConfig { min_size: 1, ..SynthConfig::default() }).is_err());
        assert!(synth_sequence(&SynthConfig { width: 62, ..SynthConfig::default() }).is_err());
    }

    /// Counting oracle: recompute each object's footprint from its bounding
    /// box in the ground truth, independent of the generator's coverage test.
    fn footprint(labels: &LabelMask) -> (usize, usize, usize, usize) {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for (i, c) in labels.classes().iter().enumerate() {
            if *c == LabelClass::Foreground {
                let (x, y) = (i % labels.width, i / labels.width);
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
        (x0, y0, x1 + 1 - x0, y1 + 1 - y0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn single_rect_area_and_halo(seed in 0u64..500, side in 2usize..20, speed in 0.0f64..6.0) {
            let cfg = SynthConfig {
                n_frames: 6, objects: 1, speed, min_size: side, max_size: side, disks: false, noise: 3.0, seed,
                ..SynthConfig::default()
            };
            for (_, labels) in synth_sequence(&cfg).unwrap() {
                let (x, y, fw, fh) = footprint(&labels);
                prop_assert_eq!(labels.count(LabelClass::Foreground), fw * fh);
                // halo: the clipped (fw+2)x(fh+2) box minus the object
                let hx = (x + fw + 1).min(64) - x.saturating_sub(1);
                let hy = (y + fh + 1).min(64) - y.saturating_sub(1);
                prop_assert_eq!(labels.count(LabelClass::Void), hx * hy - fw * fh);
                prop_assert!(x + fw <= 64 && y + fh <= 64);
            }
        }

        #[test]
        fn objects_stay_inside(seed in 0u64..200) {
            let cfg = SynthConfig { n_frames: 40, objects: 3, speed: 5.0, seed, ..SynthConfig::default() };
            for (_, labels) in synth_sequence(&cfg).unwrap() {
                // every object is at least min_size wide, so some foreground is always visible
                prop_assert!(labels.count(LabelClass::Foreground) >= 50);
            }
        }
    }
}
