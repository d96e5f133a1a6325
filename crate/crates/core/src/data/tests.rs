use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::*;
use crate::imgproc::encode_rgb_png;

fn fix(x: f64, y: f64) -> Fixation {
    Fixation {
        x,
        y,
        subject: "s0".into(),
    }
}

const WORK: (usize, usize) = (200, 200);

#[test]
fn density_single_fixation_peaks_at_its_pixel() {
    let d = density_map(&[fix(100.2, 100.7)], (200, 200), WORK, DENSITY_SIGMA).unwrap();
    assert_eq!(d.argmax(), (100, 100));
    assert_eq!(d.get(100, 100), 1.0);
    assert!(d.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn density_maps_original_coordinates() {
    // 400×100 original, fixation at (300, 50) lands at working (150, 100)
    let d = density_map(&[fix(300.0, 50.0)], (400, 100), WORK, DENSITY_SIGMA).unwrap();
    assert_eq!(d.argmax(), (150, 100));
    assert_eq!(to_working(&fix(399.99, 99.99), (400, 100), WORK), (199, 199));
    assert_eq!(to_working(&fix(0.0, 0.0), (400, 100), WORK), (0, 0));
}

#[test]
fn density_two_equal_fixations_give_equal_peaks() {
    let d = density_map(&[fix(50.5, 60.5), fix(150.5, 140.5)], (200, 200), WORK, DENSITY_SIGMA).unwrap();
    assert!((d.get(50, 60) - d.get(150, 140)).abs() < 1e-9);
    assert!((d.get(50, 60) - 1.0).abs() < 1e-9);
}

#[test]
fn density_decreases_with_distance() {
    let d = density_map(&[fix(100.5, 100.5)], (200, 200), WORK, DENSITY_SIGMA).unwrap();
    assert!(d.get(103, 100) > d.get(112, 100));
}

#[test]
fn density_needs_fixations() {
    assert!(matches!(
        density_map(&[], (200, 200), WORK, DENSITY_SIGMA),
        Err(Error::EmptyFixations)
    ));
}

fn random_density(rng: &mut ChaCha8Rng) -> ImagePlane<f64> {
    let n = rng.random_range(1..30);
    let fx: Vec<Fixation> = (0..n)
        .map(|_| fix(rng.random_range(0.0..200.0), rng.random_range(0.0..200.0)))
        .collect();
    density_map(&fx, (200, 200), WORK, DENSITY_SIGMA).unwrap()
}

#[test]
fn sample_counts_and_regions() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let d = random_density(&mut rng);
    let pts = sample_points(&d, 10, 10, 9).unwrap();
    assert_eq!(pts.iter().filter(|p| p.label == 1).count(), 10);
    assert_eq!(pts.iter().filter(|p| p.label == -1).count(), 10);
    let (p70, p80) = sampling_thresholds(&d);
    for p in &pts {
        let v = d.get(p.x, p.y);
        if p.label == 1 {
            assert!(v >= p80 && v >= p70);
        } else {
            assert!(v <= p70);
        }
    }
    let mut uniq = pts.clone();
    uniq.sort_by_key(|p| (p.x, p.y));
    uniq.dedup_by_key(|p| (p.x, p.y));
    assert_eq!(uniq.len(), 20);
}

#[test]
fn sample_determinism() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = random_density(&mut rng);
    assert_eq!(sample_points(&d, 10, 10, 1).unwrap(), sample_points(&d, 10, 10, 1).unwrap());
    assert_ne!(sample_points(&d, 10, 10, 1).unwrap(), sample_points(&d, 10, 10, 2).unwrap());
}

#[test]
fn sample_many_maps_without_violation() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for k in 0..200 {
        let d = random_density(&mut rng);
        let (p70, p80) = sampling_thresholds(&d);
        let pts = sample_points(&d, 10, 10, k).unwrap();
        assert_eq!(pts.len(), 20);
        for p in pts {
            let v = d.get(p.x, p.y);
            assert!(if p.label == 1 { v >= p80 } else { v <= p70 });
        }
    }
}

#[test]
fn flat_map_has_no_positive_region() {
    let d = ImagePlane::filled(20, 20, 0.5);
    assert!(matches!(sample_points(&d, 10, 10, 0), Err(Error::RegionTooSmall(_))));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = random_density(&mut rng);
    assert!(matches!(sample_points(&d, 40_000, 10, 0), Err(Error::RegionTooSmall(_))));
}

#[test]
fn split_examples() {
    let s = make_split(1003, 903, 1).unwrap();
    assert_eq!((s.train.len(), s.test.len()), (903, 100));
    let s = make_split(10, 9, 3).unwrap();
    assert_eq!(s.test.len(), 1);
    let splits: Vec<Vec<usize>> = (1..=10).map(|seed| make_split(50, 40, seed).unwrap().train).collect();
    let mut distinct = splits.clone();
    distinct.sort();
    distinct.dedup();
    assert!(distinct.len() >= 9);
    assert_eq!(make_split(50, 40, 7).unwrap(), make_split(50, 40, 7).unwrap());
    assert!(matches!(make_split(10, 10, 0), Err(Error::SplitRange { .. })));
    assert!(matches!(make_split(10, 0, 0), Err(Error::SplitRange { .. })));
}

#[test]
fn disk_fixations_concentrate_in_disk() {
    let (ds, truth) = synth_with_truth(50, Generator::DiskPopout, 11);
    let (mut inside, mut total) = (0usize, 0usize);
    for (item, t) in ds.items.iter().zip(&truth) {
        let area = t.data().iter().filter(|&&v| v > 0.5).count();
        assert!((area as f64 / t.len() as f64 - 0.05).abs() < 0.005);
        for f in &item.fixations {
            total += 1;
            if t.get(f.x as usize, f.y as usize) > 0.5 {
                inside += 1;
            }
        }
    }
    assert_eq!(total, 50 * FIXATIONS_PER_IMAGE);
    assert!(inside as f64 / total as f64 >= 0.6);
}

#[test]
fn uniform_fixations_pass_chi_square() {
    let ds = synth_dataset(10_000 / FIXATIONS_PER_IMAGE, Generator::Uniform, 12);
    let mut cells = [0usize; 16];
    let side = SYNTH_SIZE as f64 / 4.0;
    for f in ds.items.iter().flat_map(|i| &i.fixations) {
        let cx = ((f.x / side) as usize).min(3);
        let cy = ((f.y / side) as usize).min(3);
        cells[cy * 4 + cx] += 1;
    }
    let n: usize = cells.iter().sum();
    assert_eq!(n, 10_000);
    let expected = n as f64 / 16.0;
    let chi2: f64 = cells.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(15.0).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 {chi2}, p {p}");
}

#[test]
fn synth_is_deterministic() {
    for g in [Generator::DiskPopout, Generator::Mixed, Generator::Interaction] {
        assert_eq!(synth_dataset(4, g, 3), synth_dataset(4, g, 3));
        assert_ne!(synth_dataset(4, g, 3), synth_dataset(4, g, 4));
    }
}

#[test]
fn mixed_items_carry_external_maps() {
    let ds = synth_dataset(12, Generator::Mixed, 2);
    let mut planted = 0;
    for item in &ds.items {
        let aux = item.auxiliary(SYNTH_EXTERNAL_CHANNELS).unwrap();
        let ext = aux.external.unwrap();
        assert_eq!(ext.len(), SYNTH_EXTERNAL_CHANNELS);
        if ext[0].min_max().1 > 0.0 {
            planted += 1;
        }
    }
    assert!(planted > 0 && planted < 12);
    assert!(matches!(
        synth_dataset(1, Generator::DiskPopout, 0).items[0].auxiliary(3),
        Err(Error::MissingFile(_))
    ));
}

#[test]
fn generator_names_round_trip() {
    for g in [Generator::DiskPopout, Generator::Uniform, Generator::Mixed, Generator::Interaction] {
        assert_eq!(g.to_string().parse::<Generator>().unwrap(), g);
    }
    assert!("sparkles".parse::<Generator>().is_err());
    assert_eq!("MIT1003".parse::<Layout>().unwrap(), Layout::Mit1003);
}

fn write_image(dir: &Path, id: &str, w: usize, h: usize) {
    let img = ColorImage::from_fn(w, h, |x, y| [(x % 7) as f32 / 7.0, (y % 5) as f32 / 5.0, 0.5]);
    std::fs::write(dir.join(format!("{id}.png")), encode_rgb_png(&img).unwrap()).unwrap();
}

#[test]
fn generic_root_skips_corrupt_image() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    std::fs::create_dir_all(root.join(IMAGE_DIR)).unwrap();
    std::fs::create_dir_all(root.join(FIXATION_DIR)).unwrap();
    for id in ["a", "b"] {
        write_image(&root.join(IMAGE_DIR), id, 40, 30);
    }
    std::fs::write(root.join(IMAGE_DIR).join("c.png"), b"not a png").unwrap();
    for id in ["a", "b", "c"] {
        write_fixations(
            &root.join(FIXATION_DIR).join(format!("{id}.csv")),
            &[fix(3.5, 4.0), fix(39.0, 29.0), fix(100.0, 2.0)],
        )
        .unwrap();
    }
    let ds = load_dataset(root, Layout::Generic).unwrap();
    assert_eq!(ds.ids(), vec!["a", "b"]);
    assert_eq!(ds.skipped, 1);
    // the out-of-bounds fixation is dropped
    assert_eq!(ds.items[0].fixations.len(), 2);
    assert_eq!((ds.items[0].width, ds.items[0].height), (40, 30));
}

#[test]
fn toronto_and_mit_layouts() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    std::fs::create_dir_all(root.join("stimuli")).unwrap();
    std::fs::create_dir_all(root.join(FIXATION_DIR)).unwrap();
    for id in ["1", "2"] {
        write_image(&root.join("stimuli"), id, 681, 511);
        write_fixations(&root.join(FIXATION_DIR).join(format!("{id}.csv")), &[fix(340.0, 255.0)]).unwrap();
    }
    let ds = load_dataset(root, Layout::Toronto).unwrap();
    assert_eq!(ds.len(), 2);
    assert!(ds.items.iter().all(|i| (i.width, i.height) == (681, 511)));
    // images/ missing, stimuli/ is not a MIT1003 directory
    assert!(matches!(load_dataset(root, Layout::Mit1003), Err(Error::EmptyDataset(_))));
    std::fs::rename(root.join("stimuli"), root.join("ALLSTIMULI")).unwrap();
    assert_eq!(load_dataset(root, Layout::Mit1003).unwrap().len(), 2);
}

#[test]
fn loading_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere");
    assert!(matches!(load_dataset(&missing, Layout::Generic), Err(Error::MissingFile(p)) if p == missing));
    let root = tmp.path();
    std::fs::create_dir_all(root.join(IMAGE_DIR)).unwrap();
    std::fs::create_dir_all(root.join(FIXATION_DIR)).unwrap();
    assert!(matches!(load_dataset(root, Layout::Generic), Err(Error::EmptyDataset(_))));
    write_image(&root.join(IMAGE_DIR), "a", 10, 10);
    std::fs::write(root.join(FIXATION_DIR).join("a.csv"), "x,y,subject\n1,zz,s\n").unwrap();
    assert!(matches!(load_dataset(root, Layout::Generic), Err(Error::Fixations { .. })));
    std::fs::write(root.join(FIXATION_DIR).join("a.csv"), "x,subject\n1,s\n").unwrap();
    assert!(matches!(load_dataset(root, Layout::Generic), Err(Error::Fixations { .. })));
}

#[test]
fn fixation_csv_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("f.csv");
    let fx = vec![fix(1.25, 2.5), fix(0.0, 199.875), Fixation { x: 3.0, y: 4.0, subject: "viewer 7".into() }];
    write_fixations(&p, &fx).unwrap();
    assert!(std::fs::read_to_string(&p).unwrap().starts_with("x,y,subject\n"));
    assert_eq!(read_fixations(&p).unwrap(), fx);
}

#[test]
fn synthetic_dataset_survives_disk_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth_dataset(3, Generator::Mixed, 8);
    ds.write(tmp.path()).unwrap();
    let back = load_dataset(tmp.path(), Layout::Generic).unwrap();
    assert_eq!(back.ids(), ds.ids());
    for (a, b) in ds.items.iter().zip(&back.items) {
        assert_eq!(a.fixations, b.fixations);
        let ea = a.auxiliary(SYNTH_EXTERNAL_CHANNELS).unwrap().external.unwrap();
        let eb = b.auxiliary(SYNTH_EXTERNAL_CHANNELS).unwrap().external.unwrap();
        assert_eq!(ea, eb);
        let (ia, ib) = (a.load_image().unwrap(), b.load_image().unwrap());
        assert_eq!(ia.dims(), ib.dims());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sampling_skips_the_gap(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_density(&mut rng);
        let (p70, p80) = sampling_thresholds(&d);
        for p in sample_points(&d, 10, 10, seed).unwrap() {
            let v = d.get(p.x, p.y);
            prop_assert!(!(v > p70 && v < p80));
        }
    }

    #[test]
    fn density_ignores_fixation_order(
        pts in prop::collection::vec((0.0f64..120.0, 0.0f64..80.0), 1..12),
        rot in 0usize..12,
    ) {
        let fx: Vec<Fixation> = pts.iter().map(|&(x, y)| fix(x, y)).collect();
        let mut shuffled = fx.clone();
        shuffled.reverse();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        let a = density_map(&fx, (120, 80), WORK, DENSITY_SIGMA).unwrap();
        let b = density_map(&shuffled, (120, 80), WORK, DENSITY_SIGMA).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn splits_partition_the_dataset(size in 2usize..300, frac in 0.01f64..0.99, seed in any::<u64>()) {
        let n_train = ((size as f64 * frac) as usize).clamp(1, size - 1);
        let s = make_split(size, n_train, seed).unwrap();
        prop_assert_eq!(s.train.len(), n_train);
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..size).collect::<Vec<_>>());
    }
}
