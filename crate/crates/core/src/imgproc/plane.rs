use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major single-channel raster.
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePlane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> ImagePlane<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite pixel at index {bad}"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds a plane without validation; callers guarantee the invariants.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(width > 0 && height > 0, "empty plane");
        Self::from_raw(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "empty plane");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_raw(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise combination of two equally sized planes.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self::from_raw(
            self.width,
            self.height,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(())
    }

    /// Sum accumulated in double precision.
    pub fn sum(&self) -> T {
        T::lit(self.data.iter().map(|v| v.as_f64()).sum::<f64>())
    }

    pub fn mean(&self) -> T {
        T::lit(self.mean_f64())
    }

    /// Population variance.
    pub fn variance(&self) -> T {
        T::lit(self.variance_f64())
    }

    fn mean_f64(&self) -> f64 {
        self.data.iter().map(|v| v.as_f64()).sum::<f64>() / self.len() as f64
    }

    fn variance_f64(&self) -> f64 {
        let m = self.mean_f64();
        self.data
            .iter()
            .map(|v| {
                let d = v.as_f64() - m;
                d * d
            })
            .sum::<f64>()
            / self.len() as f64
    }

    pub fn min_max(&self) -> (T, T) {
        self.data.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
    }

    /// Position of the first maximal pixel in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    /// Per-plane standardisation; near-constant planes become all-zero.
    pub fn z_scored(&self) -> Self {
        let mean = self.mean_f64();
        let sd = self.variance_f64().sqrt();
        if sd <= 1e-9 * (1.0 + mean.abs()) {
            return Self::filled(self.width, self.height, T::zero());
        }
        Self::from_raw(
            self.width,
            self.height,
            self.data
                .iter()
                .map(|v| T::lit((v.as_f64() - mean) / sd))
                .collect(),
        )
    }

    /// Rescales to [0, 1]; constant planes map to 0.
    pub fn min_max_normalized(&self) -> Self {
        let (lo, hi) = self.min_max();
        if hi - lo <= T::zero() {
            return Self::filled(self.width, self.height, T::zero());
        }
        let span = hi - lo;
        self.map(|v| (v - lo) / span)
    }

    pub fn cast<U: Scalar>(&self) -> ImagePlane<U> {
        ImagePlane::from_raw(
            self.width,
            self.height,
            self.data
                .iter()
                .map(|&v| U::from_f64(v.as_f64()).expect("representable"))
                .collect(),
        )
    }
}

/// Three aligned planes with values in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct ColorImage<T> {
    pub red: ImagePlane<T>,
    pub green: ImagePlane<T>,
    pub blue: ImagePlane<T>,
}

impl<T: Scalar> ColorImage<T> {
    pub fn new(red: ImagePlane<T>, green: ImagePlane<T>, blue: ImagePlane<T>) -> Result<Self> {
        red.check_same_dims(&green)?;
        red.check_same_dims(&blue)?;
        for p in [&red, &green, &blue] {
            if p.data().iter().any(|&v| v < T::zero() || v > T::one()) {
                return Err(Error::InvalidArgument(
                    "color channel values must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(Self { red, green, blue })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [T; 3],
    ) -> Self {
        let mut r = Vec::with_capacity(width * height);
        let mut g = Vec::with_capacity(width * height);
        let mut b = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let [pr, pg, pb] = f(x, y);
                let clamp = |v: T| v.max(T::zero()).min(T::one());
                r.push(clamp(pr));
                g.push(clamp(pg));
                b.push(clamp(pb));
            }
        }
        Self {
            red: ImagePlane::from_raw(width, height, r),
            green: ImagePlane::from_raw(width, height, g),
            blue: ImagePlane::from_raw(width, height, b),
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [T; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    pub fn from_gray(gray: &ImagePlane<T>) -> Self {
        let clamped = gray.map(|v| v.max(T::zero()).min(T::one()));
        Self {
            red: clamped.clone(),
            green: clamped.clone(),
            blue: clamped,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.red.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.red.height()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.red.dims()
    }

    pub fn channels(&self) -> [&ImagePlane<T>; 3] {
        [&self.red, &self.green, &self.blue]
    }

    /// Mean of the three channels.
    pub fn intensity(&self) -> ImagePlane<T> {
        let third = T::one() / T::lit(3.0);
        let data = self
            .red
            .data()
            .iter()
            .zip(self.green.data())
            .zip(self.blue.data())
            .map(|((&r, &g), &b)| (r + g + b) * third)
            .collect();
        ImagePlane::from_raw(self.width(), self.height(), data)
    }

    pub fn cast<U: Scalar>(&self) -> ColorImage<U> {
        ColorImage {
            red: self.red.cast(),
            green: self.green.cast(),
            blue: self.blue.cast(),
        }
    }
}
