//! Uniform partition of the image plane into `rows x cols` disjoint cells.

use crate::imaging::PixelRect;

#[derive(Clone, Debug, PartialEq)]
pub struct RegionGrid {
    width: usize,
    height: usize,
    rows: usize,
    cols: usize,
    x_edges: Vec<usize>,
    y_edges: Vec<usize>,
}

impl RegionGrid {
    /// Cell edges are `round(i * width / cols)`; `rows`/`cols` are clamped to the
    /// frame size so that no cell is empty.
    pub fn new(width: usize, height: usize, rows: usize, cols: usize) -> Self {
        let cols = cols.clamp(1, width.max(1));
        let rows = rows.clamp(1, height.max(1));
        let edges = |n: usize, len: usize| -> Vec<usize> {
            (0..=n)
                .map(|i| ((i * len) as f64 / n as f64).round() as usize)
                .collect()
        };
        RegionGrid {
            width,
            height,
            rows,
            cols,
            x_edges: edges(cols, width),
            y_edges: edges(rows, height),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of cells `m`.
    #[inline]
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
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
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    #[inline]
    pub fn row_col(&self, cell: usize) -> (usize, usize) {
        (cell / self.cols, cell % self.cols)
    }

    pub fn bounds(&self, cell: usize) -> PixelRect {
        let (r, c) = self.row_col(cell);
        PixelRect {
            x0: self.x_edges[c],
            x1: self.x_edges[c + 1],
            y0: self.y_edges[r],
            y1: self.y_edges[r + 1],
        }
    }

    pub fn area(&self, cell: usize) -> f64 {
        self.bounds(cell).area() as f64
    }

    pub fn center(&self, cell: usize) -> (f64, f64) {
        let b = self.bounds(cell);
        ((b.x0 + b.x1) as f64 / 2.0, (b.y0 + b.y1) as f64 / 2.0)
    }

    /// Cell containing the continuous position `(x, y)`, or `None` outside the
    /// frame. Cell `i` owns `[edge_i, edge_{i+1})`.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<usize> {
        if !(x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64) {
            return None;
        }
        let col = self.x_edges[1..].partition_point(|&e| e as f64 <= x);
        let row = self.y_edges[1..].partition_point(|&e| e as f64 <= y);
        Some(self.index(row.min(self.rows - 1), col.min(self.cols - 1)))
    }

    /// Cell containing pixel `(x, y)`.
    #[inline]
    pub fn cell_of_pixel(&self, x: usize, y: usize) -> usize {
        self.cell_of(x as f64 + 0.5, y as f64 + 0.5)
            .expect("pixel inside the frame")
    }

    /// Cells of the `(2 * radius + 1)^2` block centered on `cell`, clipped at
    /// the grid border, in row-major order.
    pub fn neighborhood(&self, cell: usize, radius: usize) -> Vec<usize> {
        let (r, c) = self.row_col(cell);
        let rows = r.saturating_sub(radius)..(r + radius + 1).min(self.rows);
        let cols = c.saturating_sub(radius)..(c + radius + 1).min(self.cols);
        rows.flat_map(|rr| cols.clone().map(move |cc| self.index(rr, cc)))
            .collect()
    }
}
