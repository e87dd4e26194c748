mod common;

use navseg::navdomain::{distance, DomainConfig, DomainShape, NavigationDomain, PopularityConfig};
use navseg::partition::max_segments;
use navseg::scene::CameraIntrinsics;

fn intr() -> CameraIntrinsics {
    CameraIntrinsics::new(200.0, 64, 48)
}

fn grid(rows: usize, cols: usize) -> NavigationDomain {
    let cfg = DomainConfig {
        shape: DomainShape::Grid { rows, cols },
        ..common::line_domain(1, 0.0)
    };
    NavigationDomain::new(&cfg, intr()).unwrap()
}

#[test]
fn shipped_domains_have_unit_steps() {
    for ds in [common::desk(), common::occluder()] {
        let d = &ds.domain;
        assert_eq!(d.len(), 120);
        for k in 0..119 {
            assert!((d.view_distance(k, k + 1) - d.delta).abs() < 1e-12);
        }
        let w = d.metric_weights;
        assert!((distance(&d.poses[0], &d.poses[119], &w).unwrap() - 119.0 * d.delta).abs() < 1e-9);
    }
}

#[test]
fn max_segments_on_shipped_domain() {
    let d = &common::desk().domain;
    assert_eq!(d.navigation_ball(d.center_index(), 5).unwrap().len(), 9);
    assert_eq!(max_segments(d, 5).unwrap(), 13);
}

#[test]
fn grid_ball_matches_exhaustive_scan() {
    let d = grid(7, 9);
    for nt in 0..5 {
        for x in 0..d.len() {
            let (r, c) = d.coords(x);
            let want: Vec<usize> = (0..d.len())
                .filter(|&k| {
                    let (kr, kc) = d.coords(k);
                    let d2 = kr.abs_diff(r).pow(2) + kc.abs_diff(c).pow(2);
                    k == x || d2 < nt * nt
                })
                .collect();
            assert_eq!(d.navigation_ball(x, nt).unwrap(), want, "view {x} nt {nt}");
        }
    }
}

#[test]
fn gaussian_popularity_peaks_at_mean_and_sums_to_one() {
    let cfg = DomainConfig { popularity: PopularityConfig::Gaussian { mean: 30.0, sigma: 8.0 }, ..common::line_domain(60, 0.0) };
    let d = NavigationDomain::new(&cfg, intr()).unwrap();
    let w = &d.popularity.weights;
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let peak = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
    assert_eq!(peak, 30);
    assert!((w[25] - w[35]).abs() < 1e-12);
}

#[test]
fn bad_index_is_an_error() {
    let d = &common::desk().domain;
    assert!(d.navigation_ball(120, 1).is_err());
    assert!(d.check_index(119).is_ok());
}
