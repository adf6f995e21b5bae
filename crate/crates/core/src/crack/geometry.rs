//! Axis-aligned boxes, convex polygons, and segment clipping.

/// Half-open box `[lo, hi)`. Half-openness makes clipped measures additive over
/// box partitions even when a facet runs along a shared face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl AxisBox {
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Self {
        AxisBox { lo, hi }
    }

    /// Cube of half-side `r` centred at `c`.
    pub fn cube(c: [f64; 2], r: f64) -> Self {
        AxisBox {
            lo: [c[0] - r, c[1] - r],
            hi: [c[0] + r, c[1] + r],
        }
    }

    pub fn volume(&self, dim: usize) -> f64 {
        (0..dim).map(|a| (self.hi[a] - self.lo[a]).max(0.0)).product()
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.lo[0] + self.hi[0]), 0.5 * (self.lo[1] + self.hi[1])]
    }

    /// Open-box membership.
    pub fn contains_open(&self, p: [f64; 2], dim: usize) -> bool {
        (0..dim).all(|a| p[a] > self.lo[a] && p[a] < self.hi[a])
    }

    /// Closed-box membership with tolerance.
    pub fn contains_closed(&self, p: [f64; 2], dim: usize, tol: f64) -> bool {
        (0..dim).all(|a| p[a] >= self.lo[a] - tol && p[a] <= self.hi[a] + tol)
    }

    pub fn contains_box(&self, other: &AxisBox, dim: usize) -> bool {
        (0..dim).all(|a| other.lo[a] >= self.lo[a] && other.hi[a] <= self.hi[a])
    }

    pub fn intersection(&self, other: &AxisBox, dim: usize) -> Option<AxisBox> {
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for a in 0..dim {
            lo[a] = self.lo[a].max(other.lo[a]);
            hi[a] = self.hi[a].min(other.hi[a]);
            if hi[a] <= lo[a] {
                return None;
            }
        }
        Some(AxisBox { lo, hi })
    }

    pub fn inflate(&self, r: f64) -> AxisBox {
        AxisBox {
            lo: [self.lo[0] - r, self.lo[1] - r],
            hi: [self.hi[0] + r, self.hi[1] + r],
        }
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        [
            [self.lo[0], self.lo[1]],
            [self.hi[0], self.lo[1]],
            [self.hi[0], self.hi[1]],
            [self.lo[0], self.hi[1]],
        ]
    }
}

/// Convex polygon with counter-clockwise vertices (closed set).
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<[f64; 2]>,
}

impl ConvexPolygon {
    /// Builds the polygon, reorienting clockwise input. Returns `None` when the
    /// vertices do not form a convex polygon with positive area.
    pub fn new(mut vertices: Vec<[f64; 2]>) -> Option<Self> {
        if vertices.len() < 3 {
            return None;
        }
        let area2: f64 = (0..vertices.len())
            .map(|i| {
                let a = vertices[i];
                let b = vertices[(i + 1) % vertices.len()];
                a[0] * b[1] - a[1] * b[0]
            })
            .sum();
        if area2.abs() < 1e-300 {
            return None;
        }
        if area2 < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if cross(sub(b, a), sub(c, b)) < -1e-14 {
                return None;
            }
        }
        Some(ConvexPolygon { vertices })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn from_box(b: &AxisBox) -> Self {
        ConvexPolygon {
            vertices: b.corners().to_vec(),
        }
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|i| cross(self.vertices[i], self.vertices[(i + 1) % n]))
            .sum::<f64>()
    }
}

/// Region against which facet measure is computed.
#[derive(Clone, Debug)]
pub enum Region {
    Box(AxisBox),
    Polygon(ConvexPolygon),
    Everywhere,
}

pub(crate) fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub(crate) fn norm(a: [f64; 2]) -> f64 {
    (a[0] * a[0] + a[1] * a[1]).sqrt()
}

/// Length of `[a, b] ∩ box` with the half-open convention: pieces running along a
/// face `x_a = hi_a` are excluded, along `x_a = lo_a` included.
pub fn clip_segment_box(a: [f64; 2], b: [f64; 2], bx: &AxisBox) -> f64 {
    let d = sub(b, a);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for ax in 0..2 {
        if d[ax] == 0.0 {
            if a[ax] < bx.lo[ax] || a[ax] >= bx.hi[ax] {
                return 0.0;
            }
        } else {
            let s0 = (bx.lo[ax] - a[ax]) / d[ax];
            let s1 = (bx.hi[ax] - a[ax]) / d[ax];
            t0 = t0.max(s0.min(s1));
            t1 = t1.min(s0.max(s1));
        }
    }
    if t1 <= t0 {
        0.0
    } else {
        (t1 - t0) * norm(d)
    }
}

/// Length of `[a, b] ∩ polygon` (closed polygon), Cyrus–Beck clipping.
pub fn clip_segment_polygon(a: [f64; 2], b: [f64; 2], poly: &ConvexPolygon) -> f64 {
    let d = sub(b, a);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let v = poly.vertices();
    let n = v.len();
    for i in 0..n {
        let p = v[i];
        let q = v[(i + 1) % n];
        let e = sub(q, p);
        // inside: cross(e, x - p) >= 0
        let num = cross(e, sub(a, p));
        let den = cross(e, d);
        if den == 0.0 {
            if num < 0.0 {
                return 0.0;
            }
        } else {
            let t = -num / den;
            if den > 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    if t1 <= t0 {
        0.0
    } else {
        (t1 - t0) * norm(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_open_box_clipping() {
        let b = AxisBox::new([0.0, 0.0], [0.5, 0.5]);
        assert!((clip_segment_box([0.0, 0.0], [1.0, 0.0], &b) - 0.5).abs() < 1e-15);
        assert_eq!(clip_segment_box([0.0, 0.5], [1.0, 0.5], &b), 0.0);
        let above = AxisBox::new([0.0, 0.5], [0.5, 1.0]);
        assert!((clip_segment_box([0.0, 0.5], [1.0, 0.5], &above) - 0.5).abs() < 1e-15);
        assert!((clip_segment_box([-1.0, -1.0], [1.0, 1.0], &b) - 0.5 * 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn polygon_clipping() {
        let tri = ConvexPolygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(tri.area() > 0.0);
        assert!((clip_segment_polygon([-1.0, 0.25], [2.0, 0.25], &tri) - 0.75).abs() < 1e-14);
        assert_eq!(clip_segment_polygon([2.0, 2.0], [3.0, 3.0], &tri), 0.0);
        assert!(ConvexPolygon::new(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).is_none());
    }
}
