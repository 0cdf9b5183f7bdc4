//! Incremental Delaunay triangulation with Lawson flips.
//!
//! Points are inserted in input order. Points outside the current hull are
//! attached to every hull edge they see, so no bounding super-triangle is
//! needed. Cocircular ties are broken symbolically: the diagonal touching the
//! lowest vertex index wins, which makes the result independent of insertion
//! order.

use std::cmp::Ordering;

use super::predicates::{incircle, orient2d, Point};
use super::InterpolationError;

pub const NONE: usize = usize::MAX;

/// Counterclockwise triangle. `n[i]` is the neighbor across the edge opposite
/// `v[i]`, or [`NONE`] on the hull.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle {
    pub v: [usize; 3],
    pub n: [usize; 3],
}

impl Triangle {
    fn edge(&self, i: usize) -> (usize, usize) {
        (self.v[(i + 1) % 3], self.v[(i + 2) % 3])
    }

    fn index_of_neighbor(&self, t: usize) -> usize {
        self.n.iter().position(|&x| x == t).expect("adjacency is symmetric")
    }

    fn index_of_vertex(&self, v: usize) -> usize {
        self.v.iter().position(|&x| x == v).expect("vertex belongs to triangle")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Inside(usize),
    /// On the edge opposite vertex slot `.1` of triangle `.0`.
    OnEdge(usize, usize),
    /// Beyond the hull edge opposite slot `.1` of triangle `.0`.
    Outside(usize, usize),
    Vertex(usize, usize),
}

#[derive(Debug, Clone)]
pub struct Delaunay {
    points: Vec<Point>,
    triangles: Vec<Triangle>,
}

fn should_flip(points: &[Point], p: usize, x: usize, y: usize, d: usize) -> bool {
    match incircle(points[p], points[x], points[y], points[d]) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => {
            let lowest = p.min(x).min(y).min(d);
            lowest == p || lowest == d
        }
    }
}

impl Delaunay {
    /// Triangulates distinct points. Duplicates must be removed beforehand.
    pub fn new(points: Vec<Point>) -> Result<Self, InterpolationError> {
        if points.len() < 3 {
            return Err(InterpolationError::TooFewPoints(points.len()));
        }
        let (p0, p1) = (0, 1);
        let p2 = (2..points.len())
            .find(|&k| orient2d(points[p0], points[p1], points[k]) != Ordering::Equal)
            .ok_or(InterpolationError::Collinear)?;
        let first = if orient2d(points[p0], points[p1], points[p2]) == Ordering::Greater {
            [p0, p1, p2]
        } else {
            [p0, p2, p1]
        };
        let mut dt = Delaunay {
            triangles: vec![Triangle {
                v: first,
                n: [NONE; 3],
            }],
            points,
        };
        let mut hint = 0;
        for p in 2..dt.points.len() {
            if p == p2 {
                continue;
            }
            hint = dt.insert(p, hint);
        }
        Ok(dt)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn vertices(&self, t: usize) -> [Point; 3] {
        self.triangles[t].v.map(|i| self.points[i])
    }

    /// Finds the triangle containing `q`, walking from `hint`.
    pub fn locate(&self, q: Point, hint: usize) -> Location {
        let limit = self.triangles.len() + 16;
        let mut t = hint.min(self.triangles.len() - 1);
        let mut rotate = 0usize;
        for _ in 0..limit {
            let tri = &self.triangles[t];
            let mut next = None;
            let mut zeros = [false; 3];
            for k in 0..3 {
                // rotate the starting edge so the walk cannot cycle on ties
                let i = (k + rotate) % 3;
                let (a, b) = tri.edge(i);
                match orient2d(self.points[a], self.points[b], q) {
                    Ordering::Less => {
                        next = Some(i);
                        break;
                    }
                    Ordering::Equal => zeros[i] = true,
                    Ordering::Greater => {}
                }
            }
            rotate = rotate.wrapping_add(1);
            match next {
                Some(i) if tri.n[i] == NONE => return Location::Outside(t, i),
                Some(i) => t = tri.n[i],
                None => return self.classify(t, zeros),
            }
        }
        self.locate_brute_force(q)
    }

    fn classify(&self, t: usize, zeros: [bool; 3]) -> Location {
        match zeros.iter().filter(|&&z| z).count() {
            0 => Location::Inside(t),
            1 => Location::OnEdge(t, zeros.iter().position(|&z| z).unwrap_or(0)),
            _ => {
                // on two edge lines at once means on their shared vertex
                let slot = (0..3).find(|&i| !zeros[i]).unwrap_or(0);
                Location::Vertex(t, slot)
            }
        }
    }

    fn locate_brute_force(&self, q: Point) -> Location {
        let mut outside = None;
        for (t, tri) in self.triangles.iter().enumerate() {
            let mut zeros = [false; 3];
            let mut negative = None;
            for (i, zero) in zeros.iter_mut().enumerate() {
                let (a, b) = tri.edge(i);
                match orient2d(self.points[a], self.points[b], q) {
                    Ordering::Less => negative = Some(i),
                    Ordering::Equal => *zero = true,
                    Ordering::Greater => {}
                }
            }
            match negative {
                None => return self.classify(t, zeros),
                Some(i) if tri.n[i] == NONE && outside.is_none() => outside = Some((t, i)),
                Some(_) => {}
            }
        }
        let (t, i) = outside.expect("a point outside every triangle sees a hull edge");
        Location::Outside(t, i)
    }

    fn set_back_pointer(&mut self, neighbor: usize, old: usize, new: usize) {
        if neighbor != NONE {
            let k = self.triangles[neighbor].index_of_neighbor(old);
            self.triangles[neighbor].n[k] = new;
        }
    }

    fn push(&mut self, tri: Triangle) -> usize {
        self.triangles.push(tri);
        self.triangles.len() - 1
    }

    /// Inserts point `p` and returns a triangle incident to it.
    fn insert(&mut self, p: usize, hint: usize) -> usize {
        let q = self.points[p];
        let created = match self.locate(q, hint) {
            Location::Inside(t) => self.split_inside(t, p),
            Location::OnEdge(t, i) => self.split_edge(t, i, p),
            Location::Outside(t, i) => self.attach_outside(t, i, p),
            Location::Vertex(..) => unreachable!("duplicate points are merged before triangulation"),
        };
        let mut stack = created.clone();
        while let Some(t) = stack.pop() {
            if let Some((a, b)) = self.legalize(t) {
                stack.push(a);
                stack.push(b);
            }
        }
        created[0]
    }

    fn split_inside(&mut self, t: usize, p: usize) -> Vec<usize> {
        let Triangle { v: [a, b, c], n: [na, nb, nc] } = self.triangles[t];
        let t1 = self.triangles.len();
        let t2 = t1 + 1;
        self.triangles[t] = Triangle {
            v: [p, b, c],
            n: [na, t1, t2],
        };
        self.push(Triangle {
            v: [p, c, a],
            n: [nb, t2, t],
        });
        self.push(Triangle {
            v: [p, a, b],
            n: [nc, t, t1],
        });
        self.set_back_pointer(nb, t, t1);
        self.set_back_pointer(nc, t, t2);
        vec![t, t1, t2]
    }

    fn split_edge(&mut self, t: usize, i: usize, p: usize) -> Vec<usize> {
        let tri = self.triangles[t];
        let a = tri.v[i];
        let (b, c) = tri.edge(i);
        let u = tri.n[i];
        let nb = tri.n[(i + 1) % 3];
        let nc = tri.n[(i + 2) % 3];
        let t0 = t;
        let t1 = self.triangles.len();
        if u == NONE {
            self.triangles[t0] = Triangle {
                v: [p, a, b],
                n: [nc, NONE, t1],
            };
            self.push(Triangle {
                v: [p, c, a],
                n: [nb, t0, NONE],
            });
            self.set_back_pointer(nb, t, t1);
            return vec![t0, t1];
        }
        let ut = self.triangles[u];
        let j = ut.index_of_neighbor(t);
        let d = ut.v[j];
        // u holds the shared edge as c -> b
        let u_opp_b = ut.n[ut.index_of_vertex(b)];
        let u_opp_c = ut.n[ut.index_of_vertex(c)];
        let u0 = u;
        let u1 = t1 + 1;
        self.triangles[t0] = Triangle {
            v: [p, a, b],
            n: [nc, u1, t1],
        };
        self.push(Triangle {
            v: [p, c, a],
            n: [nb, t0, u0],
        });
        self.triangles[u0] = Triangle {
            v: [p, d, c],
            n: [u_opp_b, t1, u1],
        };
        self.push(Triangle {
            v: [p, b, d],
            n: [u_opp_c, u0, t0],
        });
        self.set_back_pointer(nb, t, t1);
        self.set_back_pointer(u_opp_c, u, u1);
        vec![t0, t1, u0, u1]
    }

    /// Next hull edge after the one opposite slot `i` of `t`, in
    /// counterclockwise hull order.
    fn next_hull_edge(&self, t: usize, i: usize) -> (usize, usize) {
        let b = self.triangles[t].edge(i).1;
        let mut cur = t;
        loop {
            let tri = &self.triangles[cur];
            let j = tri.index_of_vertex(b);
            let k = (j + 2) % 3;
            if tri.n[k] == NONE {
                return (cur, k);
            }
            cur = tri.n[k];
        }
    }

    fn prev_hull_edge(&self, t: usize, i: usize) -> (usize, usize) {
        let a = self.triangles[t].edge(i).0;
        let mut cur = t;
        loop {
            let tri = &self.triangles[cur];
            let j = tri.index_of_vertex(a);
            let k = (j + 1) % 3;
            if tri.n[k] == NONE {
                return (cur, k);
            }
            cur = tri.n[k];
        }
    }

    fn sees(&self, t: usize, i: usize, q: Point) -> bool {
        let (a, b) = self.triangles[t].edge(i);
        orient2d(self.points[a], self.points[b], q) == Ordering::Less
    }

    fn attach_outside(&mut self, t: usize, i: usize, p: usize) -> Vec<usize> {
        let q = self.points[p];
        let mut chain = std::collections::VecDeque::from([(t, i)]);
        let mut cur = (t, i);
        loop {
            let prev = self.prev_hull_edge(cur.0, cur.1);
            if prev == (t, i) || !self.sees(prev.0, prev.1, q) {
                break;
            }
            chain.push_front(prev);
            cur = prev;
        }
        let mut cur = (t, i);
        loop {
            let next = self.next_hull_edge(cur.0, cur.1);
            if chain.contains(&next) || !self.sees(next.0, next.1, q) {
                break;
            }
            chain.push_back(next);
            cur = next;
        }
        let base = self.triangles.len();
        let m = chain.len();
        let mut created = Vec::with_capacity(m);
        for (k, &(ht, hi)) in chain.iter().enumerate() {
            let (a, b) = self.triangles[ht].edge(hi);
            let id = base + k;
            self.triangles[ht].n[hi] = id;
            self.push(Triangle {
                v: [p, b, a],
                n: [
                    ht,
                    if k == 0 { NONE } else { id - 1 },
                    if k + 1 == m { NONE } else { id + 1 },
                ],
            });
            created.push(id);
        }
        created
    }

    /// Checks the edge opposite `p = v[0]` of `t` and flips it if illegal,
    /// returning the two triangles that now carry `p` at slot 0.
    fn legalize(&mut self, t: usize) -> Option<(usize, usize)> {
        let Triangle { v: [p, x, y], n: [u, tn1, tn2] } = self.triangles[t];
        if u == NONE {
            return None;
        }
        let ut = self.triangles[u];
        let j = ut.index_of_neighbor(t);
        let d = ut.v[j];
        if !should_flip(&self.points, p, x, y, d) {
            return None;
        }
        let u_opp_y = ut.n[(j + 1) % 3];
        let u_opp_x = ut.n[(j + 2) % 3];
        self.triangles[t] = Triangle {
            v: [p, x, d],
            n: [u_opp_y, u, tn2],
        };
        self.triangles[u] = Triangle {
            v: [p, d, y],
            n: [u_opp_x, tn1, t],
        };
        self.set_back_pointer(u_opp_y, u, t);
        self.set_back_pointer(tn1, t, u);
        Some((t, u))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent check: adjacency symmetric, all triangles CCW, and no
    /// point strictly inside any circumcircle.
    pub(crate) fn assert_valid(dt: &Delaunay) {
        let pts = dt.points();
        for (t, tri) in dt.triangles().iter().enumerate() {
            let [a, b, c] = dt.vertices(t);
            assert_eq!(orient2d(a, b, c), Ordering::Greater, "triangle {t} not ccw");
            for i in 0..3 {
                let u = tri.n[i];
                if u != NONE {
                    let (x, y) = tri.edge(i);
                    let ut = dt.triangles()[u];
                    let k = ut.index_of_neighbor(t);
                    assert_eq!(ut.edge(k), (y, x), "edge mismatch between {t} and {u}");
                }
            }
            for (k, &d) in pts.iter().enumerate() {
                if tri.v.contains(&k) {
                    continue;
                }
                assert_ne!(incircle(a, b, c, d), Ordering::Greater, "point {k} inside circumcircle of {t}");
            }
        }
    }

    fn hull_area(points: &[Point]) -> f64 {
        let mut idx: Vec<usize> = (0..points.len()).collect();
        idx.sort_by(|&i, &j| points[i].partial_cmp(&points[j]).unwrap());
        let mut hull: Vec<Point> = Vec::new();
        for pass in 0..2 {
            let start = hull.len();
            let iter: Box<dyn Iterator<Item = &usize>> =
                if pass == 0 { Box::new(idx.iter()) } else { Box::new(idx.iter().rev()) };
            for &i in iter {
                let p = points[i];
                while hull.len() >= start + 2
                    && orient2d(hull[hull.len() - 2], hull[hull.len() - 1], p) != Ordering::Greater
                {
                    hull.pop();
                }
                hull.push(p);
            }
            hull.pop();
        }
        let n = hull.len();
        (0..n)
            .map(|i| {
                let (a, b) = (hull[i], hull[(i + 1) % n]);
                a.0 * b.1 - b.0 * a.1
            })
            .sum::<f64>()
            * 0.5
    }

    fn tri_area(dt: &Delaunay) -> f64 {
        (0..dt.triangles().len())
            .map(|t| {
                let [a, b, c] = dt.vertices(t);
                0.5 * ((b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0))
            })
            .sum()
    }

    #[test]
    fn three_points_one_triangle() {
        let dt = Delaunay::new(vec![(0.0, 0.0), (0.0, 1.0), (1.0, 0.0)]).unwrap();
        assert_eq!(dt.triangles().len(), 1);
        assert_valid(&dt);
    }

    #[test]
    fn square_diagonal_contains_lowest_index() {
        let sq = vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let dt = Delaunay::new(sq.clone()).unwrap();
        assert_eq!(dt.triangles().len(), 2);
        assert!(dt.triangles().iter().all(|t| t.v.contains(&0)));
        // same point set in another order: the diagonal still touches index 0
        let perm = vec![sq[1], sq[0], sq[3], sq[2]];
        let dt = Delaunay::new(perm).unwrap();
        assert!(dt.triangles().iter().all(|t| t.v.contains(&0)));
        assert_valid(&dt);
    }

    #[test]
    fn collinear_and_too_few() {
        assert!(matches!(
            Delaunay::new(vec![(0.0, 0.0), (1.0, 1.0)]),
            Err(InterpolationError::TooFewPoints(2))
        ));
        assert!(matches!(
            Delaunay::new(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (5.0, 5.0)]),
            Err(InterpolationError::Collinear)
        ));
    }

    #[test]
    fn collinear_prefix_then_offset_point() {
        let mut pts: Vec<Point> = (0..10).map(|i| (i as f64, 0.0)).collect();
        pts.push((4.5, 3.0));
        pts.push((4.5, -3.0));
        let dt = Delaunay::new(pts.clone()).unwrap();
        assert_valid(&dt);
        assert!((tri_area(&dt) - hull_area(&pts)).abs() < 1e-9);
    }

    #[test]
    fn regular_lattice_with_many_ties() {
        let pts: Vec<Point> = (0..12)
            .flat_map(|i| (0..9).map(move |j| (i as f64 * 2.0, j as f64 * 2.0)))
            .collect();
        let dt = Delaunay::new(pts.clone()).unwrap();
        assert_valid(&dt);
        assert_eq!(dt.triangles().len(), 2 * 11 * 8);
        assert!((tri_area(&dt) - hull_area(&pts)).abs() < 1e-9);
    }

    #[test]
    fn random_points_are_delaunay_and_cover_hull() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[4usize, 10, 50, 200, 500] {
            let pts: Vec<Point> = (0..n)
                .map(|_| (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
                .collect();
            let dt = Delaunay::new(pts.clone()).unwrap();
            assert_valid(&dt);
            let (ha, ta) = (hull_area(&pts), tri_area(&dt));
            assert!((ha - ta).abs() < 1e-9 * ha, "n={n}: {ha} vs {ta}");
        }
    }

    #[test]
    fn harvester_tracks_near_degenerate() {
        // parallel passes of collinear samples with tiny jitter
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut pts = Vec::new();
        for pass in 0..6 {
            for k in 0..40 {
                let jitter = rng.random_range(-1e-9..1e-9);
                pts.push((k as f64 * 1.5 + 1000.0, pass as f64 * 9.0 + jitter + 5000.0));
            }
        }
        let dt = Delaunay::new(pts.clone()).unwrap();
        assert_valid(&dt);
        assert!((tri_area(&dt) - hull_area(&pts)).abs() < 1e-6);
    }

    #[test]
    fn locate_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point> = (0..100)
            .map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
            .collect();
        let dt = Delaunay::new(pts).unwrap();
        for _ in 0..500 {
            let q = (rng.random_range(-0.2..1.2), rng.random_range(-0.2..1.2));
            for hint in [0, dt.triangles().len() - 1] {
                let walked = dt.locate(q, hint);
                let brute = dt.locate_brute_force(q);
                match (walked, brute) {
                    (Location::Outside(..), Location::Outside(..)) => {}
                    (Location::Inside(a), Location::Inside(b)) => assert_eq!(a, b),
                    (a, b) => panic!("{a:?} vs {b:?}"),
                }
            }
        }
    }
}
