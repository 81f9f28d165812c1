//! Synthetic 2.5D continuous environment.
//!
//! A scene is a rectangular occupancy grid of free and wall cells. Walls are
//! extruded to `wall_height`; the floor is the plane `z = 0`. Cell `(i, j)`
//! covers `x in [i*cs, (i+1)*cs)` and `y in [j*cs, (j+1)*cs)`; anything
//! outside the grid behaves as wall.

mod generate;
mod motion;
mod nav;
mod render;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::{generate_episodes, generate_scene, generate_suite, EpisodeGenConfig, GeneratorConfig};
pub use motion::{clearance, step, AgentBody, FORWARD_STEP_M, ROTATION_STEP_RAD};
pub use nav::{geodesic_distance, DistanceField, NavGrid, SNAP_RADIUS_M};
pub use render::{ground_mask, raycast, render, DepthImage, Hit, ViewRaycast};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Free,
    Wall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    pub free: [u8; 3],
    pub wall: [u8; 3],
    #[serde(default = "default_sky")]
    pub sky: [u8; 3],
}

fn default_sky() -> [u8; 3] {
    [200, 220, 240]
}

impl Default for Palette {
    fn default() -> Self {
        Palette {
            free: [150, 130, 100],
            wall: [225, 225, 215],
            sky: default_sky(),
        }
    }
}

/// An immutable scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub id: String,
    pub cell_size: f64,
    pub wall_height: f64,
    pub palette: Palette,
    cols: usize,
    rows: usize,
    cells: Vec<Cell>,
}

/// On-disk layout. `grid[0]` is the northern (max `y`) row; `#` is wall,
/// `.` is free.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    id: String,
    cell_size: f64,
    wall_height: f64,
    #[serde(default)]
    palette: Palette,
    grid: Vec<String>,
}

impl SceneSpec {
    /// Builds a scene from `cols x rows` cells indexed `[j * cols + i]`.
    pub fn new(
        id: impl Into<String>,
        cell_size: f64,
        wall_height: f64,
        cols: usize,
        rows: usize,
        cells: Vec<Cell>,
    ) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::InvalidScene(format!("cell_size {cell_size} must be positive")));
        }
        // negated so that NaN is rejected too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(wall_height > 0.0) {
            return Err(Error::InvalidScene("wall_height must be positive".into()));
        }
        if cols == 0 || rows == 0 || cells.len() != cols * rows {
            return Err(Error::InvalidScene(format!(
                "grid of {} cells does not match {cols}x{rows}",
                cells.len()
            )));
        }
        Ok(SceneSpec {
            id: id.into(),
            cell_size,
            wall_height,
            palette: Palette::default(),
            cols,
            rows,
            cells,
        })
    }

    /// An all-free scene of the given metric size.
    pub fn open(id: impl Into<String>, width_m: f64, height_m: f64, cell_size: f64) -> Result<Self> {
        let cols = (width_m / cell_size).round() as usize;
        let rows = (height_m / cell_size).round() as usize;
        Self::new(id, cell_size, 2.5, cols, rows, vec![Cell::Free; cols * rows])
    }

    /// Parses the ASCII rows of a scene file (first row = north).
    pub fn from_rows(id: impl Into<String>, cell_size: f64, wall_height: f64, grid: &[&str]) -> Result<Self> {
        let rows = grid.len();
        let cols = grid.first().map_or(0, |r| r.chars().count());
        let mut cells = vec![Cell::Free; cols * rows];
        for (r, line) in grid.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(Error::InvalidScene(format!("row {r} is not {cols} cells wide")));
            }
            let j = rows - 1 - r;
            for (i, ch) in line.chars().enumerate() {
                cells[j * cols + i] = match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Free,
                    other => {
                        return Err(Error::InvalidScene(format!("unknown cell character {other:?}")))
                    }
                };
            }
        }
        Self::new(id, cell_size, wall_height, cols, rows, cells)
    }

    pub fn to_rows(&self) -> Vec<String> {
        (0..self.rows)
            .rev()
            .map(|j| {
                (0..self.cols)
                    .map(|i| match self.cells[j * self.cols + i] {
                        Cell::Wall => '#',
                        Cell::Free => '.',
                    })
                    .collect()
            })
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SceneFile = serde_json::from_str(text)?;
        let rows: Vec<&str> = file.grid.iter().map(String::as_str).collect();
        let mut scene = Self::from_rows(file.id, file.cell_size, file.wall_height, &rows)?;
        scene.palette = file.palette;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        let file = SceneFile {
            id: self.id.clone(),
            cell_size: self.cell_size,
            wall_height: self.wall_height,
            palette: self.palette,
            grid: self.to_rows(),
        };
        serde_json::to_string_pretty(&file).expect("scene serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width_m(&self) -> f64 {
        self.cols as f64 * self.cell_size
    }

    pub fn height_m(&self) -> f64 {
        self.rows as f64 * self.cell_size
    }

    /// Cell lookup; out-of-grid indices are walls.
    pub fn cell(&self, i: i64, j: i64) -> Cell {
        if i < 0 || j < 0 || i as usize >= self.cols || j as usize >= self.rows {
            Cell::Wall
        } else {
            self.cells[j as usize * self.cols + i as usize]
        }
    }

    pub fn is_wall(&self, i: i64, j: i64) -> bool {
        self.cell(i, j) == Cell::Wall
    }

    pub fn set_cell(&mut self, i: usize, j: usize, cell: Cell) {
        self.cells[j * self.cols + i] = cell;
    }

    /// Index of the cell containing a world position.
    pub fn cell_of(&self, x: f64, y: f64) -> (i64, i64) {
        (
            (x / self.cell_size).floor() as i64,
            (y / self.cell_size).floor() as i64,
        )
    }

    pub fn cell_center(&self, i: i64, j: i64) -> (f64, f64) {
        (
            (i as f64 + 0.5) * self.cell_size,
            (j as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.width_m() && y < self.height_m()
    }

    pub(crate) fn check_inside(&self, x: f64, y: f64) -> Result<()> {
        if self.contains(x, y) {
            Ok(())
        } else {
            Err(Error::OutOfBounds { x, y })
        }
    }

    /// Fills the axis-aligned cell rectangle `[i0, i1] x [j0, j1]`.
    pub fn fill_rect(&mut self, i0: usize, j0: usize, i1: usize, j1: usize, cell: Cell) {
        for j in j0..=j1.min(self.rows - 1) {
            for i in i0..=i1.min(self.cols - 1) {
                self.set_cell(i, j, cell);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_preserves_orientation() {
        let scene = SceneSpec::from_rows("t", 0.1, 2.5, &["###", "#..", "..."]).unwrap();
        // first text row is the northern edge
        assert!(scene.is_wall(0, 2) && scene.is_wall(2, 2));
        assert!(scene.is_wall(0, 1) && !scene.is_wall(1, 1));
        assert!(!scene.is_wall(0, 0));
        let back = SceneSpec::from_json(&scene.to_json()).unwrap();
        assert_eq!(back, scene);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(SceneSpec::from_rows("t", 0.1, 2.5, &["##", "#"]).is_err());
        assert!(SceneSpec::from_rows("t", 0.1, 2.5, &["#x"]).is_err());
        assert!(SceneSpec::from_rows("t", 0.0, 2.5, &["#."]).is_err());
        let extra = r#"{"id":"a","cell_size":0.1,"wall_height":2.5,"grid":["."],"bogus":1}"#;
        assert!(SceneSpec::from_json(extra).is_err());
    }

    #[test]
    fn outside_grid_is_wall() {
        let scene = SceneSpec::open("o", 1.0, 1.0, 0.1).unwrap();
        assert!(scene.is_wall(-1, 0) && scene.is_wall(10, 3) && !scene.is_wall(9, 9));
    }
}
