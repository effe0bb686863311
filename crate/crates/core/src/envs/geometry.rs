use rand::Rng as _;

use crate::rng::Rng;

/// Closed axis-aligned box.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        debug_assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b));
        Self { lo, hi }
    }

    pub fn cube(dim: usize, half_width: f64) -> Self {
        Self::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&x, (&lo, &hi))| x >= lo && x <= hi)
    }

    pub fn contains_strictly(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&x, (&lo, &hi))| x > lo && x < hi)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn clip(&self, p: &mut [f64]) {
        for (x, (&lo, &hi)) in p.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *x = x.clamp(lo, hi);
        }
    }

    pub fn sample_uniform(&self, rng: &mut Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&lo, &hi)| if hi > lo { rng.random_range(lo..hi) } else { lo })
            .collect()
    }
}

/// Outer box plus solid axis-aligned wall rectangles. Walls are open sets:
/// a point on a wall face is still free space.
#[derive(Clone, Debug, PartialEq)]
pub struct MazeGeometry {
    pub outer: AxisBox,
    pub walls: Vec<AxisBox>,
}

impl MazeGeometry {
    /// `[-5, 5]^2` with a plus-shaped hub of 2 m corridors joined to a 2 m
    /// ring along the border. The four 2 m x 2 m blocks between the arms are
    /// walls, so every ring location can be reached along two routes.
    pub fn multi_path() -> Self {
        let outer = AxisBox::cube(2, 5.0);
        let walls = [(1.0, 1.0), (-3.0, 1.0), (-3.0, -3.0), (1.0, -3.0)]
            .iter()
            .map(|&(x, y)| AxisBox::new(vec![x, y], vec![x + 2.0, y + 2.0]))
            .collect();
        Self { outer, walls }
    }

    pub fn is_free(&self, p: &[f64]) -> bool {
        self.outer.contains(p) && !self.walls.iter().any(|w| w.contains_strictly(p))
    }

    /// Move `position[axis]` by `delta`, stopping at the outer box and at the
    /// first wall face crossed. Returns `true` when the motion was blocked.
    pub(crate) fn move_axis(&self, position: &mut [f64], axis: usize, delta: f64) -> bool {
        let from = position[axis];
        let mut to = from + delta;
        let mut blocked = false;
        if to < self.outer.lo[axis] {
            to = self.outer.lo[axis];
            blocked = true;
        } else if to > self.outer.hi[axis] {
            to = self.outer.hi[axis];
            blocked = true;
        }
        for wall in &self.walls {
            let overlaps_across = (0..position.len())
                .filter(|&d| d != axis)
                .all(|d| position[d] > wall.lo[d] && position[d] < wall.hi[d]);
            if !overlaps_across {
                continue;
            }
            if to > from && from <= wall.lo[axis] && to > wall.lo[axis] {
                to = wall.lo[axis];
                blocked = true;
            } else if to < from && from >= wall.hi[axis] && to < wall.hi[axis] {
                to = wall.hi[axis];
                blocked = true;
            }
        }
        position[axis] = to;
        blocked
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_path_maze_layout() {
        let maze = MazeGeometry::multi_path();
        assert!(maze.is_free(&[0.0, 0.0]));
        assert!(maze.is_free(&[2.0, 0.0])); // +x arm
        assert!(maze.is_free(&[0.0, -2.0])); // -y arm
        assert!(maze.is_free(&[4.0, 4.0])); // ring corner
        assert!(maze.is_free(&[1.0, 2.0])); // wall face
        assert!(!maze.is_free(&[2.0, 2.0]));
        assert!(!maze.is_free(&[-2.0, 2.5]));
        assert!(!maze.is_free(&[5.1, 0.0]));
        let free_area = maze.outer.volume() - maze.walls.iter().map(AxisBox::volume).sum::<f64>();
        assert_eq!(free_area, 84.0);
    }

    #[test]
    fn walls_lie_inside_outer_box() {
        let maze = MazeGeometry::multi_path();
        for w in &maze.walls {
            assert!(maze.outer.contains(&w.lo) && maze.outer.contains(&w.hi));
        }
    }

    #[test]
    fn axis_move_stops_on_wall_face() {
        let maze = MazeGeometry::multi_path();
        let mut p = vec![0.99, 2.0];
        assert!(maze.move_axis(&mut p, 0, 0.05));
        assert_eq!(p, vec![1.0, 2.0]);
        // Sliding along the face is unobstructed.
        assert!(!maze.move_axis(&mut p, 1, 0.05));
        assert_eq!(p, vec![1.0, 2.05]);
        // A long step cannot tunnel through a wall.
        let mut q = vec![0.5, 2.0];
        maze.move_axis(&mut q, 0, 10.0);
        assert_eq!(q, vec![1.0, 2.0]);
    }
}
