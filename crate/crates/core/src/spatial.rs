//! Static kd-tree for ball and nearest-neighbour queries on point samples.

use crate::linalg::{dist, Point};

#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Point>,
    dim: usize,
    nodes: Vec<KdNode>,
    order: Vec<usize>,
}

#[derive(Clone, Copy, Debug)]
struct KdNode {
    lo: [f64; 3],
    hi: [f64; 3],
    start: usize,
    end: usize,
    left: usize,
    right: usize,
}

const LEAF: usize = 16;
const NONE: usize = usize::MAX;

impl KdTree {
    pub fn new(points: Vec<Point>, dim: usize) -> Self {
        let mut t = KdTree { order: (0..points.len()).collect(), points, dim, nodes: Vec::new() };
        if !t.points.is_empty() {
            let n = t.points.len();
            t.build(0, n);
        }
        t
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for k in 0..self.dim {
                lo[k] = lo[k].min(self.points[i][k]);
                hi[k] = hi[k].max(self.points[i][k]);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(KdNode { lo, hi, start, end, left: NONE, right: NONE });
        if end - start > LEAF {
            let axis = (0..self.dim)
                .max_by(|&a, &b| (hi[a] - lo[a]).partial_cmp(&(hi[b] - lo[b])).unwrap())
                .unwrap_or(0);
            let mid = (start + end) / 2;
            let pts = &self.points;
            self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                pts[a][axis].partial_cmp(&pts[b][axis]).unwrap().then(a.cmp(&b))
            });
            let l = self.build(start, mid);
            let r = self.build(mid, end);
            self.nodes[id].left = l;
            self.nodes[id].right = r;
        }
        id
    }

    fn box_dist(&self, node: &KdNode, c: &Point) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim {
            let d = if c[k] < node.lo[k] {
                node.lo[k] - c[k]
            } else if c[k] > node.hi[k] {
                c[k] - node.hi[k]
            } else {
                0.0
            };
            s += d * d;
        }
        s.sqrt()
    }

    /// Indices of points with |p − c| ≤ r, in increasing index order.
    pub fn within(&self, c: &Point, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = self.nodes[id];
            if self.box_dist(&node, c) > r {
                continue;
            }
            if node.left == NONE {
                for &i in &self.order[node.start..node.end] {
                    if dist(&self.points[i], c) <= r {
                        out.push(i);
                    }
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
        out.sort_unstable();
        out
    }

    /// Nearest point index and distance.
    pub fn nearest(&self, c: &Point) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (NONE, f64::INFINITY);
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = self.nodes[id];
            if self.box_dist(&node, c) >= best.1 && best.0 != NONE {
                continue;
            }
            if node.left == NONE {
                for &i in &self.order[node.start..node.end] {
                    let d = dist(&self.points[i], c);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        best = (i, d);
                    }
                }
            } else {
                let (a, b) = (node.left, node.right);
                let da = self.box_dist(&self.nodes[a], c);
                let db = self.box_dist(&self.nodes[b], c);
                if da <= db {
                    stack.push(b);
                    stack.push(a);
                } else {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        Some(best)
    }
}
