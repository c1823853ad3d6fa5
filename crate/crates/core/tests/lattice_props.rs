mod common;

use std::collections::HashSet;

use common::{delta_oracle, field_oracle, los_oracle, random_grid, rng, segment_cells};
use fastflow_core::lattice::supercover;
use fastflow_core::{Goal, Grid, Offset, Pos, Species, StaticField};
use proptest::prelude::*;
use rand::Rng;

fn goals_for(grid: &Grid, seed: u64) -> Vec<Pos> {
    let mut r = rng(seed);
    let floor = grid.floor_cells();
    let n = r.random_range(1..=3.min(floor.len()));
    (0..n).map(|_| floor[r.random_range(0..floor.len())]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn field_matches_relaxation_oracle(seed in any::<u64>(), wall_p in 0.0f64..0.45) {
        let mut grid = random_grid(&mut rng(seed), 12, 12, false, wall_p);
        let goals = goals_for(&grid, seed ^ 1);
        grid.set_goal(Species::Left, Goal::Cells(goals.clone())).unwrap();
        let field = StaticField::build(&grid, Species::Left).unwrap();
        let oracle = field_oracle(&grid, &goals);
        prop_assert_eq!(field.values(), &oracle[..]);
    }

    #[test]
    fn supercover_is_the_closed_square_cover(dx in -15i32..=15, dy in -15i32..=15) {
        let mut walked = Vec::new();
        supercover(Pos::new(0, 0), Offset::new(dx, dy), |p| walked.push((p.x, p.y)));
        let set: HashSet<_> = walked.iter().copied().collect();
        prop_assert_eq!(set.len(), walked.len(), "no cell visited twice");
        let expected: HashSet<_> = segment_cells((dx, dy)).into_iter().collect();
        prop_assert_eq!(set, expected);
        prop_assert_eq!(walked.first().copied(), Some((0, 0)));
        prop_assert_eq!(walked.last().copied(), Some((dx, dy)));
    }

    #[test]
    fn line_of_sight_matches_oracle_and_is_symmetric(seed in any::<u64>(), periodic in any::<bool>(), wall_p in 0.0f64..0.4) {
        let mut r = rng(seed);
        let grid = random_grid(&mut r, 12, 12, periodic, wall_p);
        let cells: Vec<Pos> = (0..grid.height())
            .flat_map(|y| (0..grid.width()).map(move |x| Pos::new(x, y)))
            .collect();
        for &a in &cells {
            for &b in &cells {
                let los = grid.line_of_sight(a, b);
                prop_assert_eq!(los, los_oracle(&grid, a, b), "{:?} -> {:?}", a, b);
                prop_assert_eq!(los, grid.line_of_sight(b, a));
            }
        }
    }

    #[test]
    fn torus_delta_is_minimal_and_reconstructs(w in 1i32..40, h in 1i32..5, x0 in 0i32..40, x1 in 0i32..40, periodic in any::<bool>()) {
        let grid = Grid::new(w, h, periodic).unwrap();
        let (a, b) = (Pos::new(x0 % w, 0), Pos::new(x1 % w, h - 1));
        let d = grid.torus_delta(a, b);
        prop_assert_eq!((d.dx, d.dy), delta_oracle(&grid, a, b));
        prop_assert_eq!(d.dy, b.y - a.y);
        if periodic {
            prop_assert!(2 * d.dx <= w && 2 * d.dx > -w);
            prop_assert_eq!((a.x + d.dx).rem_euclid(w), b.x);
        } else {
            prop_assert_eq!(a.x + d.dx, b.x);
        }
    }
}

#[test]
fn every_small_open_grid_field_is_exact() {
    for w in 1..=12 {
        for h in 1..=12 {
            let mut grid = Grid::new(w, h, false).unwrap();
            let goals = vec![Pos::new(w - 1, h / 2)];
            grid.set_goal(Species::Right, Goal::Cells(goals.clone())).unwrap();
            let field = StaticField::build(&grid, Species::Right).unwrap();
            assert_eq!(field.values(), &field_oracle(&grid, &goals)[..], "{w}x{h}");
        }
    }
}
