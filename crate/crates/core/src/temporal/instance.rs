use crate::error::{Error, Result};
use crate::grid::{mask_count, PixelMask};

/// Inclusive pixel bounds of a mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub left: usize,
    pub right: usize,
    pub top: usize,
    pub bottom: usize,
}

impl BBox {
    pub fn center(&self) -> (f64, f64) {
        (
            (self.left + self.right) as f64 / 2.0,
            (self.top + self.bottom) as f64 / 2.0,
        )
    }
}

/// Which box sides touch the image border.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Truncation {
    pub left: bool,
    pub right: bool,
    pub top: bool,
    pub bottom: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: usize,
    pub class_id: u32,
    pub mask: PixelMask,
    pub bbox: BBox,
    pub truncated: Truncation,
}

impl Instance {
    /// Builds an instance from its silhouette. Empty masks are a lookup error.
    pub fn from_mask(id: usize, class_id: u32, mask: PixelMask) -> Result<Self> {
        let (w, h) = mask.dims();
        let mut bbox: Option<BBox> = None;
        for y in 0..h {
            for x in 0..w {
                if !*mask.get(x, y) {
                    continue;
                }
                bbox = Some(match bbox {
                    None => BBox {
                        left: x,
                        right: x,
                        top: y,
                        bottom: y,
                    },
                    Some(b) => BBox {
                        left: b.left.min(x),
                        right: b.right.max(x),
                        top: b.top.min(y),
                        bottom: b.bottom.max(y),
                    },
                });
            }
        }
        let bbox = bbox.ok_or_else(|| Error::Lookup(format!("instance {id} has an empty mask")))?;
        let truncated = Truncation {
            left: bbox.left == 0,
            right: bbox.right + 1 == w,
            top: bbox.top == 0,
            bottom: bbox.bottom + 1 == h,
        };
        Ok(Self {
            id,
            class_id,
            mask,
            bbox,
            truncated,
        })
    }

    pub fn area(&self) -> usize {
        mask_count(&self.mask)
    }

    /// Centroid of the mask pixels.
    pub fn centroid(&self) -> (f64, f64) {
        let (w, _) = self.mask.dims();
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for (i, m) in self.mask.as_slice().iter().enumerate() {
            if *m {
                sx += (i % w) as f64;
                sy += (i / w) as f64;
                n += 1.0;
            }
        }
        (sx / n, sy / n)
    }
}

/// Instances present in one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InstanceSet {
    pub instances: Vec<Instance>,
}

impl InstanceSet {
    pub fn new(instances: Vec<Instance>) -> Self {
        Self { instances }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Instance> {
        self.instances.iter().find(|i| i.id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Instance> {
        self.instances.iter()
    }
}

/// Intersection over union of two masks; 0 when both are empty.
pub fn iou(a: &PixelMask, b: &PixelMask) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (p, q) in a.as_slice().iter().zip(b.as_slice()) {
        inter += (*p && *q) as usize;
        union += (*p || *q) as usize;
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn bbox_and_truncation() {
        let mask = Grid::from_fn(10, 8, |x, y| (0..3).contains(&x) && (2..5).contains(&y));
        let inst = Instance::from_mask(4, 1, mask).unwrap();
        assert_eq!(
            inst.bbox,
            BBox {
                left: 0,
                right: 2,
                top: 2,
                bottom: 4
            }
        );
        assert!(inst.truncated.left);
        assert!(!inst.truncated.right && !inst.truncated.top && !inst.truncated.bottom);
        assert_eq!(inst.area(), 9);
        assert_eq!(inst.centroid(), (1.0, 3.0));
    }

    #[test]
    fn empty_mask_is_lookup_error() {
        let mask = Grid::filled(4, 4, false);
        assert!(matches!(Instance::from_mask(0, 0, mask), Err(Error::Lookup(_))));
    }

    #[test]
    fn iou_values() {
        let a = Grid::from_fn(4, 1, |x, _| x < 2);
        let b = Grid::from_fn(4, 1, |x, _| x >= 1 && x < 3);
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&Grid::filled(2, 2, false), &Grid::filled(2, 2, false)), 0.0);
    }
}
