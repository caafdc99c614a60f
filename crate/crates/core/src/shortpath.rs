//! Shortest paths in the plane around disjoint circular obstacles.
//!
//! Paths may travel anywhere outside the open disks; the optimum is a
//! taut chain of tangent segments and boundary arcs. For a single obstacle
//! the closed form is used; for several, a tangent visibility graph with
//! Dijkstra. Obstacles are assumed pairwise disjoint.

use num_complex::Complex64;

#[derive(Clone, Copy, Debug)]
pub struct Circle {
    pub center: Complex64,
    pub radius: f64,
}

/// Does the open segment between `a` and `b` meet the open disk?
pub fn segment_hits_disk(a: Complex64, b: Complex64, c: &Circle) -> bool {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (a - c.center).norm() < c.radius;
    }
    let t = (((c.center - a).re * d.re + (c.center - a).im * d.im) / len2).clamp(0.0, 1.0);
    let closest = a + t * d;
    (closest - c.center).norm() < c.radius * (1.0 - 1e-13)
}

/// Taut length around a single circle for endpooints outside the closed disk
/// whose connecting segment crosses it: tangent + arc + tangent.
fn around_one(a: Complex64, b: Complex64, c: &Circle) -> f64 {
    let da = (a - c.center).norm();
    let db = (b - c.center).norm();
    let ta = (da * da - c.radius * c.radius).max(0.0).sqrt();
    let tb = (db * db - c.radius * c.radius).max(0.0).sqrt();
    let phi = angle_between(a - c.center, b - c.center);
    let wrap = phi - (c.radius / da).min(1.0).acos() - (c.radius / db).min(1.0).acos();
    ta + tb + c.radius * wrap.max(0.0)
}

fn angle_between(u: Complex64, v: Complex64) -> f64 {
    let dot = u.re * v.re + u.im * v.im;
    let cross = u.re * v.im - u.im * v.re;
    cross.atan2(dot).abs()
}

/// Length of the shortest path from `a` to `b` that avoids every open disk.
/// Endpoints may lie on circle boundaries but not strictly inside.
pub fn shortest_path_length(a: Complex64, b: Complex64, circles: &[Circle]) -> f64 {
    let blocked: Vec<&Circle> = circles
        .iter()
        .filter(|c| segment_hits_disk(a, b, c))
        .collect();
    if blocked.is_empty() {
        return (a - b).norm();
    }
    if circles.len() == 1 {
        return around_one(a, b, &circles[0]);
    }
    visibility_dijkstra(a, b, circles)
}

#[derive(Clone, Copy)]
struct Node {
    point: Complex64,
    /// Circle the node sits on (tangent point), if any.
    circle: Option<usize>,
}

/// Tangent points on `c` as seen from exterior point `p`.
fn tangent_points(p: Complex64, c: &Circle) -> Vec<Complex64> {
    let v = p - c.center;
    let d = v.norm();
    if d <= c.radius * (1.0 + 1e-14) {
        // On the boundary: the point itself is the contact point.
        return vec![c.center + v * (c.radius / d)];
    }
    let alpha = (c.radius / d).acos();
    let base = v.arg();
    vec![
        c.center + Complex64::from_polar(c.radius, base + alpha),
        c.center + Complex64::from_polar(c.radius, base - alpha),
    ]
}

/// Contact points of the four bitangent lines between two disjoint circles,
/// as pairs (point on `ci`, point on `cj`).
fn bitangent_pairs(ci: &Circle, cj: &Circle) -> Vec<(Complex64, Complex64)> {
    let mut out = Vec::with_capacity(4);
    let d = (cj.center - ci.center).norm();
    let base = (cj.center - ci.center).arg();
    // Outer tangents: normal offset angle from the centre line.
    let cos_outer = (ci.radius - cj.radius) / d;
    if cos_outer.abs() <= 1.0 {
        let t = cos_outer.acos();
        for s in [t, -t] {
            out.push((
                ci.center + Complex64::from_polar(ci.radius, base + s),
                cj.center + Complex64::from_polar(cj.radius, base + s),
            ));
        }
    }
    // Inner tangents.
    let cos_inner = (ci.radius + cj.radius) / d;
    if cos_inner.abs() <= 1.0 {
        let t = cos_inner.acos();
        for s in [t, -t] {
            out.push((
                ci.center + Complex64::from_polar(ci.radius, base + s),
                cj.center + Complex64::from_polar(cj.radius, base + s + std::f64::consts::PI),
            ));
        }
    }
    out
}

// Tangent segments graze their circles; `segment_hits_disk` tests the open
// disk with a relative tolerance, so grazing passes.
fn segment_clear(a: Complex64, b: Complex64, circles: &[Circle]) -> bool {
    circles.iter().all(|c| !segment_hits_disk(a, b, c))
}

fn visibility_dijkstra(a: Complex64, b: Complex64, circles: &[Circle]) -> f64 {
    let mut nodes: Vec<Node> = vec![
        Node { point: a, circle: None },
        Node { point: b, circle: None },
    ];
    for (k, c) in circles.iter().enumerate() {
        for p in tangent_points(a, c) {
            nodes.push(Node { point: p, circle: Some(k) });
        }
        for p in tangent_points(b, c) {
            nodes.push(Node { point: p, circle: Some(k) });
        }
    }
    for i in 0..circles.len() {
        for j in (i + 1)..circles.len() {
            for (p, q) in bitangent_pairs(&circles[i], &circles[j]) {
                nodes.push(Node { point: p, circle: Some(i) });
                nodes.push(Node { point: q, circle: Some(j) });
            }
        }
    }
    let n = nodes.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (ni, nj) = (nodes[i], nodes[j]);
            let cost = if ni.circle.is_some() && ni.circle == nj.circle {
                // Arc along the common circle (shorter side; arcs are clear
                // of other disks because the obstacles are disjoint).
                let c = &circles[ni.circle.unwrap()];
                let ang = angle_between(ni.point - c.center, nj.point - c.center);
                Some(c.radius * ang)
            } else if segment_clear(ni.point, nj.point, circles) {
                Some((ni.point - nj.point).norm())
            } else {
                None
            };
            if let Some(w) = cost {
                adj[i].push((j, w));
                adj[j].push((i, w));
            }
        }
    }
    // Dijkstra from node 0 to node 1.
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[0] = 0.0;
    loop {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (k, &d) in dist.iter().enumerate() {
            if !done[k] && d < best_d {
                best = Some(k);
                best_d = d;
            }
        }
        let Some(u) = best else { break };
        if u == 1 {
            return dist[1];
        }
        done[u] = true;
        for &(v, w) in &adj[u] {
            if dist[u] + w < dist[v] {
                dist[v] = dist[u] + w;
            }
        }
    }
    dist[1]
}
