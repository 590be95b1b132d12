//! Dense row-major rasters and the image, depth, mask and error-map types built on them.

use crate::error::{Error, Result};

pub type Rgb = [f64; 3];

/// Row-major `width x height` raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::contract(format!(
                "grid data has {} elements, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
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
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        &mut self.data[y * self.width + x]
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_dims<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn ensure_dims<U>(&self, other: &Grid<U>, what: &str) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "{what}: dimension mismatch {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }
}

/// Metric depth in meters per pixel.
pub type DepthMap = Grid<f64>;

/// Per-pixel boolean selection.
pub type PixelMask = Grid<bool>;

/// RGB image with intensities in `[0, 1]` and per-pixel validity.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub pixels: Grid<Rgb>,
    pub valid: Grid<bool>,
}

impl Image {
    pub fn new(pixels: Grid<Rgb>) -> Self {
        let valid = Grid::filled(pixels.width(), pixels.height(), true);
        Self { pixels, valid }
    }

    pub fn with_validity(pixels: Grid<Rgb>, valid: Grid<bool>) -> Result<Self> {
        pixels.ensure_dims(&valid, "image validity")?;
        Ok(Self { pixels, valid })
    }

    pub fn constant(width: usize, height: usize, rgb: Rgb) -> Self {
        Self::new(Grid::filled(width, height, rgb))
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.pixels.dims()
    }

    #[inline]
    pub fn rgb(&self, x: usize, y: usize) -> Rgb {
        *self.pixels.get(x, y)
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        *self.valid.get(x, y)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.as_slice().iter().filter(|v| **v).count()
    }
}

/// Non-negative per-pixel error with validity.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMap {
    pub values: Grid<f64>,
    pub valid: Grid<bool>,
}

impl ErrorMap {
    pub fn new(values: Grid<f64>, valid: Grid<bool>) -> Result<Self> {
        values.ensure_dims(&valid, "error map validity")?;
        Ok(Self { values, valid })
    }

    pub fn uniform(width: usize, height: usize, value: f64) -> Self {
        Self {
            values: Grid::filled(width, height, value),
            valid: Grid::filled(width, height, true),
        }
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }

    /// Mean over valid pixels inside `mask` (all valid pixels when `mask` is `None`).
    pub fn masked_mean(&self, mask: Option<&PixelMask>) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (i, (&v, &ok)) in self.values.as_slice().iter().zip(self.valid.as_slice()).enumerate() {
            if ok && mask.map_or(true, |m| m.as_slice()[i]) {
                sum += v;
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }
}

pub fn mask_complement(mask: &PixelMask) -> PixelMask {
    mask.map(|m| !m)
}

pub fn mask_count(mask: &PixelMask) -> usize {
    mask.as_slice().iter().filter(|m| **m).count()
}

/// Reflect an index into `0..n` the way a one-pixel reflection pad does (`-1 -> 1`, `n -> n-2`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let mut i = i;
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * (n - 1) - i;
    }
    i.clamp(0, n - 1) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_matches_pad_semantics() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(0, 5), 0);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(4, 5), 4);
        assert_eq!(reflect(-1, 1), 0);
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(Grid::from_vec(2, 2, vec![0.0; 3]).is_err());
        let g = Grid::from_vec(2, 2, vec![1, 2, 3, 4]).unwrap();
        assert_eq!(*g.get(1, 1), 4);
        assert_eq!(g.index(1, 1), 3);
    }

    #[test]
    fn masked_mean_skips_invalid_and_unmasked() {
        let values = Grid::from_vec(2, 1, vec![0.2, 0.6]).unwrap();
        let valid = Grid::from_vec(2, 1, vec![true, false]).unwrap();
        let em = ErrorMap::new(values, valid).unwrap();
        assert_eq!(em.masked_mean(None), Some(0.2));
        let mask = Grid::from_vec(2, 1, vec![false, true]).unwrap();
        assert_eq!(em.masked_mean(Some(&mask)), None);
    }
}
