//! Center-surround conspicuity maps for intensity, color opponency and orientation.

use crate::error::{Error, Result};
use crate::imgproc::{
    gaussian_blur, gaussian_pyramid, max_levels, oriented_responses, pyr_down, ColorImage, ImagePlane,
    Pyramid, ORIENTATIONS, ORIENTED_SIGMA,
};
use crate::scalar::Scalar;

pub const MIN_SIZE: usize = 64;
const CENTER_LEVELS: [usize; 3] = [2, 3, 4];
const SURROUND_DELTAS: [usize; 2] = [3, 4];
const PYRAMID_DEPTH: usize = 9;
const CONSPICUITY_LEVEL: usize = 2;
/// Smoothing of squared oriented responses, in pixels of each level.
const ORIENTATION_POOLING: f64 = 1.0;

/// Intensity, color and orientation conspicuity at input resolution.
#[derive(Clone, Debug)]
pub struct Conspicuity<T> {
    pub intensity: ImagePlane<T>,
    pub color: ImagePlane<T>,
    pub orientation: ImagePlane<T>,
}

impl<T: Scalar> Conspicuity<T> {
    pub fn into_planes(self) -> [ImagePlane<T>; 3] {
        [self.intensity, self.color, self.orientation]
    }
}

/// Opponent color planes `R, G, B, Y` on hue normalised by intensity.
pub(crate) fn opponent_planes<T: Scalar>(img: &ColorImage<T>) -> [ImagePlane<T>; 4] {
    let intensity = img.intensity();
    let (_, max_i) = intensity.min_max();
    let floor = max_i * T::lit(0.1);
    let (w, h) = img.dims();
    let n = w * h;
    let mut planes: [Vec<T>; 4] = std::array::from_fn(|_| Vec::with_capacity(n));
    let half = T::lit(0.5);
    for i in 0..n {
        let iv = intensity.data()[i];
        let (r, g, b) = if iv > floor && iv > T::zero() {
            (
                img.red.data()[i] / iv,
                img.green.data()[i] / iv,
                img.blue.data()[i] / iv,
            )
        } else {
            (T::zero(), T::zero(), T::zero())
        };
        let pos = |v: T| v.max(T::zero());
        planes[0].push(pos(r - (g + b) * half));
        planes[1].push(pos(g - (r + b) * half));
        planes[2].push(pos(b - (r + g) * half));
        planes[3].push(pos((r + g) * half - (r - g).abs() * half - b));
    }
    planes.map(|d| ImagePlane::from_raw(w, h, d))
}

/// Rescales a non-negative map to [0, 1] and weights it by `(1 - m)^2`, where
/// `m` is the mean height of its local-maximum plateaus other than the global one.
pub fn normalize_map<T: Scalar>(map: &ImagePlane<T>) -> ImagePlane<T> {
    let (_, max) = map.min_max();
    if !(max > T::zero()) {
        return ImagePlane::filled(map.width(), map.height(), T::zero());
    }
    let scaled = map.map(|v| v.max(T::zero()) / max);
    let mut others = plateau_maxima(&scaled);
    // drop one plateau at the global maximum
    if let Some(pos) = others.iter().position(|&v| v >= T::one()) {
        others.swap_remove(pos);
    }
    let mean_other = if others.is_empty() {
        T::zero()
    } else {
        others.iter().copied().sum::<T>() / T::from_usize_lossy(others.len())
    };
    let weight = (T::one() - mean_other) * (T::one() - mean_other);
    scaled.map(|v| v * weight)
}

/// Heights of 8-connected plateaus of local maxima with positive value.
fn plateau_maxima<T: Scalar>(p: &ImagePlane<T>) -> Vec<T> {
    let (w, h) = p.dims();
    let is_peak = |x: usize, y: usize| -> bool {
        let v = p.get(x, y);
        if v <= T::zero() {
            return false;
        }
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                if p.get(nx as usize, ny as usize) > v {
                    return false;
                }
            }
        }
        true
    };
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if seen[y * w + x] || !is_peak(x, y) {
                continue;
            }
            let v = p.get(x, y);
            seen[y * w + x] = true;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let (nx, ny) = (cx as isize + dx, cy as isize + dy);
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        if !seen[ny * w + nx] && p.get(nx, ny) == v {
                            seen[ny * w + nx] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
            out.push(v);
        }
    }
    out
}

struct Scales {
    depth: usize,
}

impl Scales {
    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let last = self.depth - 1;
        CENTER_LEVELS.iter().flat_map(move |&c| {
            SURROUND_DELTAS
                .iter()
                .map(move |&d| (c.min(last), (c + d).min(last)))
        })
    }

    fn conspicuity_level(&self) -> usize {
        CONSPICUITY_LEVEL.min(self.depth - 1)
    }
}

/// Moves a map from pyramid level `from` to level `to`.
fn to_level<T: Scalar>(pyr: &Pyramid<T>, map: &ImagePlane<T>, from: usize, to: usize) -> Result<ImagePlane<T>> {
    if from >= to {
        return pyr.project(map, from, to);
    }
    let mut m = map.clone();
    for _ in from..to {
        m = pyr_down(&m);
    }
    Ok(m)
}

fn across_scale<T: Scalar>(
    pyr: &Pyramid<T>,
    maps: impl Iterator<Item = (usize, ImagePlane<T>)>,
    level: usize,
) -> Result<ImagePlane<T>> {
    let (w, h) = pyr.level(level).dims();
    let mut acc = ImagePlane::filled(w, h, T::zero());
    for (from, m) in maps {
        let r = to_level(pyr, &m, from, level)?;
        for (a, b) in acc.data_mut().iter_mut().zip(r.data()) {
            *a += *b;
        }
    }
    Ok(acc)
}

/// `|center - surround|` with the surround resampled onto level `c`.
fn center_surround<T: Scalar>(
    pyr: &Pyramid<T>,
    center: &ImagePlane<T>,
    surround: &ImagePlane<T>,
    c: usize,
    s: usize,
) -> Result<ImagePlane<T>> {
    let up = pyr.project(surround, s, c)?;
    center.zip_map(&up, |a, b| (a - b).abs())
}

pub fn itti_channels<T: Scalar>(img: &ColorImage<T>) -> Result<Conspicuity<T>> {
    let (w, h) = img.dims();
    if w.min(h) < MIN_SIZE {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            what: "center-surround pyramid",
        });
    }
    let depth = PYRAMID_DEPTH.min(max_levels(w, h));
    let scales = Scales { depth };
    let intensity = gaussian_pyramid(&img.intensity(), depth)?;
    let [r, g, b, y] = opponent_planes(img);
    let pr = gaussian_pyramid(&r, depth)?;
    let pg = gaussian_pyramid(&g, depth)?;
    let pb = gaussian_pyramid(&b, depth)?;
    let py = gaussian_pyramid(&y, depth)?;

    let cl = scales.conspicuity_level();
    let (cw, ch) = intensity.level(cl).dims();

    let int_maps: Vec<(usize, ImagePlane<T>)> = scales
        .pairs()
        .map(|(c, s)| {
            center_surround(&intensity, intensity.level(c), intensity.level(s), c, s).map(|m| (c, normalize_map(&m)))
        })
        .collect::<Result<_>>()?;
    let int_consp = across_scale(&intensity, int_maps.into_iter(), cl)?;

    let diff = |a: &Pyramid<T>, b: &Pyramid<T>, l: usize| -> ImagePlane<T> {
        a.level(l).zip_map(b.level(l), |u, v| u - v).expect("same dims")
    };
    let mut color_maps = Vec::new();
    for (c, s) in scales.pairs() {
        let rg = center_surround(&intensity, &diff(&pr, &pg, c), &diff(&pr, &pg, s), c, s)?;
        let by = center_surround(&intensity, &diff(&pb, &py, c), &diff(&pb, &py, s), c, s)?;
        color_maps.push((c, normalize_map(&rg).zip_map(&normalize_map(&by), |a, b| a + b)?));
    }
    let color_consp = across_scale(&intensity, color_maps.into_iter(), cl)?;

    // local oriented energy per level
    let oriented: Vec<Vec<ImagePlane<T>>> = intensity
        .levels()
        .iter()
        .map(|l| {
            oriented_responses(l, ORIENTED_SIGMA)
                .into_iter()
                .map(|r| gaussian_blur(&r.map(|v| v * v), ORIENTATION_POOLING))
                .collect()
        })
        .collect();
    let mut orient_consp = ImagePlane::filled(cw, ch, T::zero());
    for theta in 0..ORIENTATIONS {
        let maps: Vec<(usize, ImagePlane<T>)> = scales
            .pairs()
            .map(|(c, s)| {
                center_surround(&intensity, &oriented[c][theta], &oriented[s][theta], c, s).map(|m| (c, normalize_map(&m)))
            })
            .collect::<Result<_>>()?;
        let per_theta = normalize_map(&across_scale(&intensity, maps.into_iter(), cl)?);
        for (a, b) in orient_consp.data_mut().iter_mut().zip(per_theta.data()) {
            *a += *b;
        }
    }

    let finish = |m: ImagePlane<T>| intensity.to_input(&normalize_map(&m), cl);
    Ok(Conspicuity {
        intensity: finish(int_consp)?,
        color: finish(color_consp)?,
        orientation: finish(orient_consp)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_image_has_no_conspicuity() {
        let img = ColorImage::filled(96, 80, [0.5f64; 3]);
        let c = itti_channels(&img).unwrap();
        for p in c.into_planes() {
            assert!(p.data().iter().all(|&v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn rejects_small_images() {
        let img = ColorImage::filled(63, 100, [0.5f64; 3]);
        assert!(matches!(itti_channels(&img), Err(Error::ImageTooSmall { .. })));
        assert!(itti_channels(&ColorImage::filled(64, 64, [0.5f64; 3])).is_ok());
    }

    #[test]
    fn red_disk_pops_out_in_color() {
        let (cx, cy, r) = (140.0, 60.0, 14.0);
        let img = ColorImage::from_fn(200, 200, |x, y| {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            if d <= r {
                [0.9, 0.1, 0.1]
            } else {
                [0.5, 0.5, 0.5]
            }
        });
        let c = itti_channels(&img).unwrap();
        let (ax, ay) = c.color.argmax();
        assert!((ax as f64 - cx).abs() <= r && (ay as f64 - cy).abs() <= r, "argmax ({ax},{ay})");
    }

    fn bar_field(odd: (usize, usize)) -> (ColorImage<f64>, (f64, f64)) {
        // 8x8 grid of horizontal bars at 25 px spacing, one turned 45 degrees
        let center = |i: usize| 12.0 + 25.0 * i as f64;
        let odd_center = (center(odd.0), center(odd.1));
        let img = ColorImage::from_fn(200, 200, |x, y| {
            let (x, y) = (x as f64, y as f64);
            let (i, j) = (((x + 0.5) / 25.0) as usize, ((y + 0.5) / 25.0) as usize);
            let (dx, dy) = (x - center(i.min(7)), y - center(j.min(7)));
            let angle = if (i, j) == odd { std::f64::consts::FRAC_PI_4 } else { 0.0 };
            let (s, c) = f64::sin_cos(angle);
            let on = (dx * c + dy * s).abs() <= 8.0 && (-dx * s + dy * c).abs() <= 2.0;
            if on { [0.9; 3] } else { [0.1; 3] }
        });
        (img, odd_center)
    }

    #[test]
    fn oblique_bar_pops_out_in_orientation() {
        for odd in [(1, 1), (4, 2), (6, 5), (2, 7), (0, 3)] {
            let (img, (ox, oy)) = bar_field(odd);
            let c = itti_channels(&img).unwrap();
            let (ax, ay) = c.orientation.argmax();
            assert!(
                (ax as f64 - ox).abs() <= 12.5 && (ay as f64 - oy).abs() <= 12.5,
                "argmax ({ax},{ay}) vs bar at ({ox},{oy})"
            );
        }
    }

    #[test]
    fn rotation_equivariant() {
        let f = |x: usize, y: usize| {
            let v = ((x * 37 + y * 91) % 101) as f64 / 101.0;
            if (x / 20 + y / 15) % 3 == 0 { [v, 0.5 * v, 0.2] } else { [0.2, 0.3, 0.6] }
        };
        let (w, h) = (120, 90);
        let a = itti_channels(&ColorImage::from_fn(w, h, f)).unwrap();
        let b = itti_channels(&ColorImage::from_fn(w, h, |x, y| f(w - 1 - x, h - 1 - y))).unwrap();
        for (p, q) in a.into_planes().iter().zip(b.into_planes().iter()) {
            for y in 0..h {
                for x in 0..w {
                    assert!((p.get(x, y) - q.get(w - 1 - x, h - 1 - y)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn normalization_suppresses_many_peaks() {
        let single = ImagePlane::<f64>::from_fn(20, 20, |x, y| if (x, y) == (5, 5) { 1.0 } else { 0.0 });
        let many = ImagePlane::<f64>::from_fn(20, 20, |x, y| {
            if x % 5 == 0 && y % 5 == 0 { 1.0 } else { 0.0 }
        });
        let mut two = many.clone();
        two.set(0, 0, 2.0);
        assert_eq!(normalize_map(&single).get(5, 5), 1.0);
        // all other peaks at half height: weight (1 - 0.5)^2
        assert!((normalize_map(&two).get(0, 0) - 0.25).abs() < 1e-12);
    }
}
