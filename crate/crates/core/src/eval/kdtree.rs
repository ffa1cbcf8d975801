/// Static 2-d tree over planar points, answering exact nearest-neighbor
/// squared distances.
pub(crate) struct KdTree {
    // Points permuted into implicit tree order: the median of every slice is
    // the node, left half below it, right half above.
    nodes: Vec<(f64, f64)>,
}

impl KdTree {
    pub(crate) fn build(points: &[(f64, f64)]) -> Self {
        let mut nodes = points.to_vec();
        arrange(&mut nodes, 0);
        Self { nodes }
    }

    /// Smallest squared distance from `query` to any stored point, or
    /// infinity for an empty tree.
    pub(crate) fn nearest_sq(&self, query: (f64, f64)) -> f64 {
        let mut best = f64::INFINITY;
        search(&self.nodes, 0, query, &mut best);
        best
    }
}

fn coord(p: (f64, f64), axis: usize) -> f64 {
    if axis == 0 {
        p.0
    } else {
        p.1
    }
}

fn arrange(slice: &mut [(f64, f64)], axis: usize) {
    if slice.len() <= 1 {
        return;
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |a, b| coord(*a, axis).total_cmp(&coord(*b, axis)));
    let (left, right) = slice.split_at_mut(mid);
    arrange(left, 1 - axis);
    arrange(&mut right[1..], 1 - axis);
}

fn search(slice: &[(f64, f64)], axis: usize, query: (f64, f64), best: &mut f64) {
    if slice.is_empty() {
        return;
    }
    let mid = slice.len() / 2;
    let node = slice[mid];
    let dx = query.0 - node.0;
    let dy = query.1 - node.1;
    let d = dx * dx + dy * dy;
    if d < *best {
        *best = d;
    }
    let delta = coord(query, axis) - coord(node, axis);
    let (near, far) = if delta < 0.0 {
        (&slice[..mid], &slice[mid + 1..])
    } else {
        (&slice[mid + 1..], &slice[..mid])
    };
    search(near, 1 - axis, query, best);
    if delta * delta <= *best {
        search(far, 1 - axis, query, best);
    }
}
