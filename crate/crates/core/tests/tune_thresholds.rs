use std::collections::BTreeMap;

use refless_core::data::{LanguagePair, TokenScoredSegment};
use refless_core::scoring::{default_grid, tune_thresholds, DevSet};

/// One dev set whose systems are lists of single-token segments with the
/// given mean log-probabilities. Human score = share of segments above -0.6.
fn dev_set(systems: &[Vec<f64>]) -> DevSet {
    let lp: LanguagePair = "de-en".parse().unwrap();
    let mut human = BTreeMap::new();
    let mut segs = BTreeMap::new();
    for (i, ms) in systems.iter().enumerate() {
        let name = format!("sys{i}");
        human.insert(name.clone(), ms.iter().filter(|&&m| m > -0.6).count() as f64 / ms.len() as f64);
        let list = ms
            .iter()
            .enumerate()
            .map(|(j, m)| TokenScoredSegment::new(j, vec!["x".into()], vec![*m]).unwrap())
            .collect();
        segs.insert(name, list);
    }
    DevSet {
        lang_pair: lp,
        human,
        systems: segs,
    }
}

fn mix(counts: &[(f64, usize)]) -> Vec<f64> {
    counts.iter().flat_map(|&(m, n)| std::iter::repeat(m).take(n)).collect()
}

#[test]
fn two_level_set_every_tie_resolved_by_smaller_high() {
    let systems: Vec<Vec<f64>> = [1, 3, 5, 7, 9].iter().map(|&k| mix(&[(-0.5, k), (-2.0, 10 - k)])).collect();
    let dev = [dev_set(&systems)];
    let grid = [-3.0, -1.0, -0.6, 0.0];
    // Brute force over all six pairs, one two-point grid at a time.
    let mut perfect = Vec::new();
    for (i, &l) in grid.iter().enumerate() {
        for &h in &grid[i + 1..] {
            if let Ok(c) = tune_thresholds(&dev, &[l, h]) {
                if (c.correlation - 1.0).abs() < 1e-12 {
                    perfect.push((l, h));
                }
            }
        }
    }
    assert!(perfect.contains(&(-3.0, -0.6)) && perfect.contains(&(-1.0, -0.6)));
    assert_eq!(perfect.len(), 5);
    let best = tune_thresholds(&dev, &grid).unwrap();
    assert!((best.correlation - 1.0).abs() < 1e-12);
    assert_eq!((best.low, best.high), (-3.0, -1.0));
}

#[test]
fn three_level_set_needs_high_at_minus_point_six() {
    let systems = vec![
        mix(&[(-0.5, 1), (-0.8, 6), (-2.0, 5)]),
        mix(&[(-0.5, 3), (-0.8, 1), (-2.0, 8)]),
        mix(&[(-0.5, 5), (-0.8, 5), (-2.0, 2)]),
        mix(&[(-0.5, 7), (-0.8, 0), (-2.0, 5)]),
        mix(&[(-0.5, 9), (-0.8, 3), (-2.0, 0)]),
    ];
    let best = tune_thresholds(&[dev_set(&systems)], &[-3.0, -1.0, -0.6, 0.0]).unwrap();
    assert_eq!((best.low, best.high), (-3.0, -0.6));
    assert!((best.correlation - 1.0).abs() < 1e-12);
}

#[test]
fn single_pair_grid() {
    let systems: Vec<Vec<f64>> = [1, 2, 4, 7].iter().map(|&k| mix(&[(-0.5, k), (-2.0, 10 - k)])).collect();
    let best = tune_thresholds(&[dev_set(&systems)], &[-1.0, 0.0]).unwrap();
    assert_eq!((best.low, best.high), (-1.0, 0.0));
}

#[test]
fn default_grid_finds_perfect_pair() {
    let systems: Vec<Vec<f64>> = [1, 3, 5, 7, 9].iter().map(|&k| mix(&[(-0.5, k), (-2.0, 10 - k)])).collect();
    let grid = default_grid();
    assert_eq!(grid.len(), 16);
    let best = tune_thresholds(&[dev_set(&systems)], &grid).unwrap();
    assert!((best.correlation - 1.0).abs() < 1e-12);
    // Smallest high separating -2 from -0.5 is -2.0 itself; the largest low
    // below it keeps -2 in the neutral band.
    assert_eq!((best.low, best.high), (-2.2, -2.0));
}
