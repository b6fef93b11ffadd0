//! Uniform-grid spatial index and the cell-approximated location entropy used
//! by the Spatial heuristic.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use crate::model::{Point, WorkerId};

pub type Cell = (i64, i64);

/// Cell coordinate of `p` on a grid anchored at `origin`.
#[inline]
pub fn cell_of(origin: &Point, cell_size: f64, p: &Point) -> Cell {
    (
        ((p.x - origin.x) / cell_size).floor() as i64,
        ((p.y - origin.y) / cell_size).floor() as i64,
    )
}

/// Bucket grid over a static point set, answering disk queries exactly.
#[derive(Clone, Debug)]
pub struct GridIndex {
    cell_size: f64,
    origin: Point,
    points: Vec<(usize, Point)>,
    buckets: HashMap<Cell, Vec<u32>>,
}

impl GridIndex {
    /// Builds an index whose origin is the componentwise minimum of the points.
    pub fn build(cell_size: f64, points: impl IntoIterator<Item = (usize, Point)>) -> Self {
        let points: Vec<_> = points.into_iter().collect();
        let origin = points.iter().fold(Point::new(f64::INFINITY, f64::INFINITY), |acc, (_, p)| {
            Point::new(acc.x.min(p.x), acc.y.min(p.y))
        });
        let origin = if origin.x.is_finite() { origin } else { Point::new(0.0, 0.0) };
        Self::with_origin(origin, cell_size, points)
    }

    pub fn with_origin(origin: Point, cell_size: f64, points: impl IntoIterator<Item = (usize, Point)>) -> Self {
        assert!(cell_size > 0.0, "cell size must be positive");
        let points: Vec<_> = points.into_iter().collect();
        let mut buckets: HashMap<Cell, Vec<u32>> = HashMap::new();
        for (slot, (_, p)) in points.iter().enumerate() {
            buckets.entry(cell_of(&origin, cell_size, p)).or_default().push(slot as u32);
        }
        GridIndex {
            cell_size,
            origin,
            points,
            buckets,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn cell(&self, p: &Point) -> Cell {
        cell_of(&self.origin, self.cell_size, p)
    }

    fn for_each_within(&self, center: &Point, radius: f64, mut f: impl FnMut(usize) -> bool) {
        if self.points.is_empty() {
            return;
        }
        let lo = self.cell(&Point::new(center.x - radius, center.y - radius));
        let hi = self.cell(&Point::new(center.x + radius, center.y + radius));
        let span = (hi.0 - lo.0 + 1).saturating_mul(hi.1 - lo.1 + 1);
        if span as usize > self.buckets.len() {
            for (id, p) in &self.points {
                if p.distance(center) <= radius && !f(*id) {
                    return;
                }
            }
            return;
        }
        for cx in lo.0..=hi.0 {
            for cy in lo.1..=hi.1 {
                let Some(bucket) = self.buckets.get(&(cx, cy)) else { continue };
                for &slot in bucket {
                    let (id, p) = &self.points[slot as usize];
                    if p.distance(center) <= radius && !f(*id) {
                        return;
                    }
                }
            }
        }
    }

    /// Ids of the points within Euclidean distance `<= radius` of `center`, sorted.
    pub fn query_disk(&self, center: &Point, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.query_disk_into(center, radius, &mut out);
        out
    }

    /// Like [`query_disk`](Self::query_disk) but appends into a reusable buffer.
    pub fn query_disk_into(&self, center: &Point, radius: f64, out: &mut Vec<usize>) {
        let start = out.len();
        self.for_each_within(center, radius, |id| {
            out.push(id);
            true
        });
        out[start..].sort_unstable();
    }

    pub fn any_within(&self, center: &Point, radius: f64) -> bool {
        let mut found = false;
        self.for_each_within(center, radius, |_| {
            found = true;
            false
        });
        found
    }
}

/// Historical visit histograms per grid cell with memoized region entropy.
///
/// A task region is approximated by snapping its center to the enclosing
/// cell and taking every cell whose center lies within the radius of that
/// cell's center. The per-worker histograms of those cells are merged and the
/// Shannon entropy (natural log) of the merged distribution is returned.
#[derive(Debug)]
pub struct EntropyGrid {
    cell_size: f64,
    origin: Point,
    histograms: HashMap<Cell, BTreeMap<WorkerId, u32>>,
    memo: Mutex<HashMap<(Cell, u64), f64>>,
}

impl Clone for EntropyGrid {
    fn clone(&self) -> Self {
        EntropyGrid {
            cell_size: self.cell_size,
            origin: self.origin,
            histograms: self.histograms.clone(),
            memo: Mutex::new(self.memo.lock().expect("memo poisoned").clone()),
        }
    }
}

impl EntropyGrid {
    pub fn new(origin: Point, cell_size: f64) -> Self {
        assert!(cell_size > 0.0, "cell size must be positive");
        EntropyGrid {
            cell_size,
            origin,
            histograms: HashMap::new(),
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn from_visits(origin: Point, cell_size: f64, visits: impl IntoIterator<Item = (WorkerId, Point)>) -> Self {
        let mut grid = Self::new(origin, cell_size);
        grid.add_visits(visits);
        grid
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn cell(&self, p: &Point) -> Cell {
        cell_of(&self.origin, self.cell_size, p)
    }

    pub fn cell_center(&self, cell: Cell) -> Point {
        Point::new(
            self.origin.x + (cell.0 as f64 + 0.5) * self.cell_size,
            self.origin.y + (cell.1 as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn add_visit(&mut self, worker: WorkerId, p: Point) {
        let cell = self.cell(&p);
        *self.histograms.entry(cell).or_default().entry(worker).or_insert(0) += 1;
        self.memo.get_mut().expect("memo poisoned").clear();
    }

    pub fn add_visits(&mut self, visits: impl IntoIterator<Item = (WorkerId, Point)>) {
        let memo = self.memo.get_mut().expect("memo poisoned");
        memo.clear();
        for (worker, p) in visits {
            let cell = cell_of(&self.origin, self.cell_size, &p);
            *self.histograms.entry(cell).or_default().entry(worker).or_insert(0) += 1;
        }
    }

    pub fn histogram(&self, cell: Cell) -> Option<&BTreeMap<WorkerId, u32>> {
        self.histograms.get(&cell)
    }

    pub fn total_visits(&self) -> u64 {
        self.histograms.values().flat_map(|h| h.values()).map(|&c| c as u64).sum()
    }

    /// Cells approximating the disk of `radius` around the cell enclosing `center`.
    pub fn region_cells(&self, center: &Point, radius: f64) -> Vec<Cell> {
        let snapped = self.cell(center);
        let snapped_center = self.cell_center(snapped);
        let reach = (radius / self.cell_size).ceil() as i64;
        let offsets = (2 * reach + 1).saturating_mul(2 * reach + 1);
        let inside = |c: &Cell| self.cell_center(*c).distance(&snapped_center) <= radius;
        let mut cells: Vec<Cell> = if offsets as usize > self.histograms.len() {
            self.histograms.keys().copied().filter(inside).collect()
        } else {
            (-reach..=reach)
                .flat_map(|dx| (-reach..=reach).map(move |dy| (snapped.0 + dx, snapped.1 + dy)))
                .filter(|c| self.histograms.contains_key(c))
                .filter(inside)
                .collect()
        };
        cells.sort_unstable();
        cells
    }

    /// Merged per-worker visit counts over the approximated region.
    pub fn region_histogram(&self, center: &Point, radius: f64) -> BTreeMap<WorkerId, u64> {
        let mut merged = BTreeMap::new();
        for cell in self.region_cells(center, radius) {
            for (&w, &c) in &self.histograms[&cell] {
                *merged.entry(w).or_insert(0) += c as u64;
            }
        }
        merged
    }

    pub fn region_entropy_uncached(&self, center: &Point, radius: f64) -> f64 {
        histogram_entropy(self.region_histogram(center, radius).values().copied())
    }

    /// Location entropy of the region, memoized by `(snapped cell, radius)`.
    pub fn region_entropy(&self, center: &Point, radius: f64) -> f64 {
        let key = (self.cell(center), radius.to_bits());
        if let Some(&v) = self.memo.lock().expect("memo poisoned").get(&key) {
            return v;
        }
        let v = self.region_entropy_uncached(center, radius);
        self.memo.lock().expect("memo poisoned").insert(key, v);
        v
    }
}

/// Shannon entropy (nats) of a histogram; zero when it is empty.
pub fn histogram_entropy(counts: impl IntoIterator<Item = u64> + Clone) -> f64 {
    let total: u64 = counts.clone().into_iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let h: f64 = counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_boundary_included() {
        let idx = GridIndex::build(1.0, [(7, Point::new(3.0, 4.0)), (8, Point::new(3.0, 4.1))]);
        assert_eq!(idx.query_disk(&Point::new(0.0, 0.0), 5.0), vec![7]);
    }

    #[test]
    fn empty_index_returns_nothing() {
        let idx = GridIndex::build(1.0, std::iter::empty());
        assert!(idx.query_disk(&Point::new(0.0, 0.0), 3.0).is_empty());
        assert!(!idx.any_within(&Point::new(0.0, 0.0), 3.0));
    }

    #[test]
    fn uniform_region_entropy_is_ln_n() {
        let visits = (0..4).map(|w| (WorkerId(w), Point::new(0.5, 0.5)));
        let grid = EntropyGrid::from_visits(Point::new(0.0, 0.0), 1.0, visits);
        let re = grid.region_entropy(&Point::new(0.2, 0.7), 0.4);
        assert!((re - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_worker_region_is_zero() {
        let visits = (0..10).map(|_| (WorkerId(3), Point::new(0.5, 0.5)));
        let grid = EntropyGrid::from_visits(Point::new(0.0, 0.0), 1.0, visits);
        assert_eq!(grid.region_entropy(&Point::new(0.5, 0.5), 2.0), 0.0);
    }

    #[test]
    fn merges_three_cells_before_entropy() {
        // Cells (0,0), (1,0), (2,0) with {a:2}, {a:1,b:1}, {b:2}.
        let a = WorkerId(1);
        let b = WorkerId(2);
        let visits = vec![
            (a, Point::new(0.5, 0.5)),
            (a, Point::new(0.5, 0.5)),
            (a, Point::new(1.5, 0.5)),
            (b, Point::new(1.5, 0.5)),
            (b, Point::new(2.5, 0.5)),
            (b, Point::new(2.5, 0.5)),
        ];
        let grid = EntropyGrid::from_visits(Point::new(0.0, 0.0), 1.0, visits);
        // Snapped to (1,0); radius 1 reaches neighbor centers at distance 1.
        let region = grid.region_cells(&Point::new(1.3, 0.2), 1.0);
        assert_eq!(region, vec![(0, 0), (1, 0), (2, 0)]);
        let re = grid.region_entropy(&Point::new(1.3, 0.2), 1.0);
        assert!((re - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_region_has_zero_entropy() {
        let grid = EntropyGrid::new(Point::new(0.0, 0.0), 1.0);
        assert_eq!(grid.region_entropy(&Point::new(4.0, 4.0), 3.0), 0.0);
    }

    #[test]
    fn adding_visits_invalidates_memo() {
        let mut grid = EntropyGrid::from_visits(Point::new(0.0, 0.0), 1.0, [(WorkerId(1), Point::new(0.5, 0.5))]);
        assert_eq!(grid.region_entropy(&Point::new(0.5, 0.5), 1.0), 0.0);
        grid.add_visit(WorkerId(2), Point::new(0.5, 0.5));
        assert!((grid.region_entropy(&Point::new(0.5, 0.5), 1.0) - 2f64.ln()).abs() < 1e-12);
    }
}
