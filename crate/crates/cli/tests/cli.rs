use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use salience::data::{fixated_pixels, load_dataset, Layout};
use salience::eval::auc;
use salience::fmap::{read_fmap, write_fmap};
use salience::imgproc::ImagePlane;
use tempfile::TempDir;

fn salience(args: &[&str], cache: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_salience"));
    cmd.args(args).env_remove("SALIENCE_CACHE_DIR");
    if let Some(c) = cache {
        cmd.env("SALIENCE_CACHE_DIR", c);
    }
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = salience(args, None);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, generator: &str, images: usize, seed: u64) -> PathBuf {
    let root = dir.join(format!("{generator}-{seed}"));
    let n = images.to_string();
    let s = seed.to_string();
    ok(&[
        "synth",
        "--generator",
        generator,
        "--images",
        &n,
        "--seed",
        &s,
        "--output",
        root.to_str().unwrap(),
    ]);
    root
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn count_ext(dir: &Path, ext: &str) -> usize {
    std::fs::read_dir(dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == ext))
        .count()
}

#[test]
fn features_are_idempotent() {
    let tmp = TempDir::new().unwrap();
    let root = synth(tmp.path(), "disk", 3, 1);
    let cfg = write_config(
        tmp.path(),
        "run.ini",
        &format!("[dataset]\nroot = {}\n[output]\ndir = out\n", root.display()),
    );
    let c = cfg.to_str().unwrap();
    let first = ok(&["--config", c, "features"]);
    assert!(first.contains("3 computed, 0 up to date"), "{first}");
    let file = tmp.path().join("out/features/disk_0000.fmap");
    let planes: Vec<ImagePlane<f32>> = read_fmap(&file).unwrap();
    assert_eq!(planes.len(), 32);
    let stamp = std::fs::metadata(&file).unwrap().modified().unwrap();

    let second = ok(&["--config", c, "features"]);
    assert!(second.contains("0 computed, 3 up to date"), "{second}");
    assert_eq!(std::fs::metadata(&file).unwrap().modified().unwrap(), stamp);

    let forced = ok(&["--config", c, "--force", "features"]);
    assert!(forced.contains("3 computed, 0 up to date"), "{forced}");
    assert!(!tmp.path().join("out/.salience.lock").exists());
}

#[test]
fn missing_root_names_the_path() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.ini", "[dataset]\nroot = nowhere/at-all\n");
    let out = salience(&["--config", cfg.to_str().unwrap(), "features"], None);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nowhere/at-all"), "{err}");
}

#[test]
fn locked_output_is_refused() {
    let tmp = TempDir::new().unwrap();
    let root = synth(tmp.path(), "disk", 2, 1);
    let cfg = write_config(
        tmp.path(),
        "run.ini",
        &format!("[dataset]\nroot = {}\n", root.display()),
    );
    std::fs::create_dir_all(tmp.path().join("out")).unwrap();
    std::fs::write(tmp.path().join("out/.salience.lock"), "1").unwrap();
    let out = salience(&["--config", cfg.to_str().unwrap(), "features"], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("in use"));
}

#[test]
fn rbmkl_training_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let root = synth(tmp.path(), "disk", 50, 2);
    let body = |out: &str| {
        format!(
            "[dataset]\nroot = {}\n[train]\nmethod = rbmkl\nstride = 8\nmax_outer = 10\n[output]\ndir = {out}\n",
            root.display()
        )
    };
    let start = std::time::Instant::now();
    let a = write_config(tmp.path(), "a.ini", &body("a"));
    ok(&["--config", a.to_str().unwrap(), "--jobs", "1", "train"]);
    assert!(start.elapsed().as_secs() < 60, "training took {:?}", start.elapsed());
    let b = write_config(tmp.path(), "b.ini", &body("b"));
    ok(&["--config", b.to_str().unwrap(), "train"]);

    let ma = std::fs::read(tmp.path().join("a/model.salm")).unwrap();
    let mb = std::fs::read(tmp.path().join("b/model.salm")).unwrap();
    assert_eq!(ma, mb);
    let log = std::fs::read_to_string(tmp.path().join("a/train.log")).unwrap();
    assert!(log.starts_with("config hash "), "{log}");
    assert!(log.contains("objective"), "{log}");
    assert!(log.contains("kernels"), "{log}");
}

#[test]
fn lmkl_without_gating_fails_before_work() {
    let tmp = TempDir::new().unwrap();
    let root = synth(tmp.path(), "disk", 2, 1);
    let cfg = write_config(
        tmp.path(),
        "run.ini",
        &format!("[dataset]\nroot = {}\n[train]\nmethod = lmkl\n", root.display()),
    );
    let out = salience(&["--config", cfg.to_str().unwrap(), "train"], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("gating"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn empty_seed_list_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.ini", "[dataset]\nsynth = disk\nimages = 4\n[eval]\nseeds = ,\n");
    let out = salience(&["--config", cfg.to_str().unwrap(), "eval"], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn predict_counts_and_mismatch() {
    let tmp = TempDir::new().unwrap();
    let root = synth(tmp.path(), "disk", 100, 3);
    let cfg = write_config(
        tmp.path(),
        "run.ini",
        &format!(
            "[dataset]\nroot = {}\n[train]\nmethod = linear-svm\nstride = 8\n",
            root.display()
        ),
    );
    let c = cfg.to_str().unwrap();
    ok(&["--config", c, "train"]);
    let model = tmp.path().join("out/model.salm");
    let m = model.to_str().unwrap();
    ok(&["--config", c, "predict", "--model", m]);
    let pred = tmp.path().join("out/predictions");
    assert_eq!(count_ext(&pred, "png"), 100);
    assert_eq!(count_ext(&pred, "fmap"), 100);

    // a stack with the wrong channel count
    let bad = tmp.path().join("bad.fmap");
    write_fmap(&bad, &vec![ImagePlane::<f32>::new(200, 200, vec![0.0; 40000]).unwrap(); 31]).unwrap();
    let out = salience(&["--config", c, "predict", "--model", m, "--input", bad.to_str().unwrap()], None);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("channel count mismatch"), "{err}");

    // a single image file works too
    let img = std::fs::read_dir(root.join("images")).unwrap().next().unwrap().unwrap().path();
    ok(&["--config", c, "predict", "--model", m, "--input", img.to_str().unwrap()]);
}

/// Train, predict and score by hand; the result must equal what `eval`
/// reports for the same cross-dataset protocol.
#[test]
fn predict_then_score_matches_eval() {
    let tmp = TempDir::new().unwrap();
    let a = synth(tmp.path(), "mixed", 12, 4);
    let b = synth(tmp.path(), "mixed", 6, 5);
    let cfg = write_config(
        tmp.path(),
        "run.ini",
        &format!(
            "[dataset]\nroot = {}\n[test_dataset]\nroot = {}\n[features]\nexternal_channels = 4\nsets = full\n\
             [train]\nmethod = nlmkl\nstride = 8\nmax_outer = 5\n[sampling]\nseed = 7\n[eval]\nseeds = 7\n",
            a.display(),
            b.display()
        ),
    );
    let c = cfg.to_str().unwrap();
    let cache = tmp.path().join("cache");
    let out = salience(&["--config", c, "eval"], Some(&cache));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_dir(&cache).unwrap().count() > 0);
    let runs = std::fs::read_to_string(tmp.path().join("out/runs.csv")).unwrap();
    let reported: f64 = runs.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();

    ok(&["--config", c, "train"]);
    let model = tmp.path().join("out/model.salm");
    ok(&["--config", c, "predict", "--model", model.to_str().unwrap(), "--input", b.to_str().unwrap()]);

    let test = load_dataset(&b, Layout::Generic).unwrap();
    let mut total = 0.0;
    for item in &test.items {
        let map: Vec<ImagePlane<f32>> = read_fmap(&tmp.path().join(format!("out/predictions/{}.fmap", item.id))).unwrap();
        let fixated = fixated_pixels(&item.fixations, (item.width, item.height), map[0].dims());
        total += auc(&map[0], &fixated).unwrap();
    }
    let mine = total / test.len() as f64;
    assert!((mine - reported).abs() < 1e-12, "{mine} vs {reported}");
}

#[test]
fn eval_writes_five_method_table() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "run.ini",
        "[dataset]\nsynth = disk\nimages = 10\nseed = 1\n[train]\n\
         methods = linear-svm, adaboost, nlmkl, rbmkl, lmkl\ngating = itti\nstride = 8\nmax_outer = 4\nrounds = 20\n\
         [eval]\nseeds = 1..2\nn_train = 7\n",
    );
    let stdout = ok(&["--config", cfg.to_str().unwrap(), "--seed", "3", "eval"]);
    for m in ["linear-svm", "adaboost", "nlmkl", "rbmkl", "lmkl"] {
        assert!(stdout.contains(&format!("{m} (low-mid)")), "{stdout}");
    }
    let summary = std::fs::read_to_string(tmp.path().join("out/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 6);
    assert!(summary.starts_with("method,features,mean,std,best\n"));
    // --seed replaces the seed list with that one seed
    let runs = std::fs::read_to_string(tmp.path().join("out/runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 6);
    assert!(tmp.path().join("out/report.txt").is_file());
}
