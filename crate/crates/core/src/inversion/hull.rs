use crate::numeric::{dot3, Point};

/// Convex hull membership test for source positions.
///
/// Planar hulls are built exactly (monotone chain). In 3D membership is
/// decided by a Frank–Wolfe projection onto the hull, stopped once the
/// duality gap certifies the answer.
#[derive(Debug, Clone)]
pub struct Hull {
    dim: usize,
    points: Vec<Point>,
    polygon: Vec<[f64; 2]>,
    tol: f64,
}

fn cross(o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

impl Hull {
    pub fn new(dim: usize, points: &[Point]) -> Self {
        let span = points
            .iter()
            .flat_map(|p| p.iter().copied())
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1.0);
        let tol = 1e-9 * span;
        let polygon = if dim == 2 { monotone_chain(points) } else { Vec::new() };
        Self {
            dim,
            points: points.to_vec(),
            polygon,
            tol,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        if self.dim == 2 {
            self.contains_2d(p)
        } else {
            self.contains_fw(p)
        }
    }

    fn contains_2d(&self, p: &Point) -> bool {
        let q = [p[0], p[1]];
        match self.polygon.len() {
            0 => false,
            1 => (self.polygon[0][0] - q[0]).hypot(self.polygon[0][1] - q[1]) <= self.tol,
            n => (0..n).all(|i| {
                let a = &self.polygon[i];
                let b = &self.polygon[(i + 1) % n];
                let len = (b[0] - a[0]).hypot(b[1] - a[1]);
                cross(a, b, &q) >= -self.tol * len
            }),
        }
    }

    fn contains_fw(&self, p: &Point) -> bool {
        if self.points.is_empty() {
            return false;
        }
        let dist2 = |x: &Point| {
            let d = [x[0] - p[0], x[1] - p[1], x[2] - p[2]];
            dot3(&d, &d)
        };
        let tol2 = self.tol * self.tol;
        let mut x = *self
            .points
            .iter()
            .min_by(|a, b| dist2(a).total_cmp(&dist2(b)))
            .expect("non-empty");
        for _ in 0..20_000 {
            let g = [x[0] - p[0], x[1] - p[1], x[2] - p[2]];
            let f = dot3(&g, &g);
            if f <= tol2 {
                return true;
            }
            let v = self
                .points
                .iter()
                .min_by(|a, b| dot3(&g, a).total_cmp(&dot3(&g, b)))
                .expect("non-empty");
            let dir = [v[0] - x[0], v[1] - x[1], v[2] - x[2]];
            let gap = -dot3(&g, &dir);
            // the hull's squared distance is at least f - 2 gap
            if f - 2.0 * gap > tol2 || gap <= 0.0 {
                return false;
            }
            let step = (gap / dot3(&dir, &dir)).min(1.0);
            for a in 0..3 {
                x[a] += step * dir[a];
            }
        }
        false
    }
}

fn monotone_chain(points: &[Point]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}
