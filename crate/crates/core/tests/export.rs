mod support;

use image::ImageReader;
use visionseg_core::datasetfmt::{
    build_manifest, export_system, write_dataset, DatasetManifest, PageSystems, PieceInfo,
    SAMPLE_HEIGHT, SAMPLE_WIDTH,
};
use visionseg_core::imaging::Image;
use visionseg_core::SystemRegion;

fn decode(path: &std::path::Path) -> image::DynamicImage {
    ImageReader::open(path)
        .unwrap()
        .with_guessed_format()
        .unwrap()
        .decode()
        .unwrap()
}

fn region(row_start: usize, row_end: usize, col_start: usize, col_end: usize) -> SystemRegion {
    SystemRegion {
        row_start,
        row_end,
        col_start,
        col_end,
        order_index: 0,
    }
}

fn textured(h: usize, w: usize) -> Image<f64> {
    Image::from_fn(h, w, |r, c| {
        0.5 + 0.3 * ((r as f64 / 9.0).sin() * (c as f64 / 23.0).cos())
    })
    .unwrap()
}

#[test]
fn samples_decode_to_fixed_gray_size() {
    let dir = tempfile::tempdir().unwrap();
    let page = textured(300, 200);
    for (k, reg) in [
        region(0, 300, 0, 200),
        region(10, 11, 5, 6),
        region(100, 180, 0, 200),
    ]
    .iter()
    .enumerate()
    {
        let path = dir.path().join(format!("{k}.jpg"));
        export_system(&page, reg, &path).unwrap();
        let img = decode(&path);
        assert_eq!(
            (img.height() as usize, img.width() as usize),
            (SAMPLE_HEIGHT, SAMPLE_WIDTH)
        );
        assert_eq!(img.color(), image::ColorType::L8);
    }
    assert!(export_system(&page, &region(0, 301, 0, 10), dir.path().join("x.jpg")).is_err());
    assert!(export_system(&page, &region(5, 5, 0, 10), dir.path().join("y.jpg")).is_err());
}

#[test]
fn constant_crop_stays_constant() {
    let dir = tempfile::tempdir().unwrap();
    let page = Image::filled(90, 400, 0.4).unwrap();
    let path = dir.path().join("c.jpg");
    export_system(&page, &region(3, 80, 10, 390), &path).unwrap();
    let want = (0.4f64 * 255.0).round();
    assert!(decode(&path)
        .to_luma8()
        .pixels()
        .all(|p| (p.0[0] as f64 - want).abs() <= 2.0));
}

#[test]
fn full_size_crop_survives_compression() {
    let dir = tempfile::tempdir().unwrap();
    let page = textured(SAMPLE_HEIGHT, SAMPLE_WIDTH);
    let path = dir.path().join("p.jpg");
    export_system(&page, &region(0, SAMPLE_HEIGHT, 0, SAMPLE_WIDTH), &path).unwrap();
    let reference = page.to_luma8();
    let decoded = decode(&path).to_luma8();
    let mse: f64 = reference
        .pixels()
        .zip(decoded.pixels())
        .map(|(a, b)| (a.0[0] as f64 - b.0[0] as f64).powi(2))
        .sum::<f64>()
        / (SAMPLE_HEIGHT * SAMPLE_WIDTH) as f64;
    let psnr = 10.0 * (255.0f64 * 255.0 / mse.max(1e-12)).log10();
    assert!(psnr >= 40.0, "PSNR {psnr}");
}

fn pages() -> Vec<PageSystems> {
    let piece = PieceInfo {
        piece_id: "op28-no4".into(),
        title: "Prelude".into(),
        author: "F. Chopin".into(),
        key: Some("E minor".into()),
        imslp_page: None,
    };
    let regions = |n: usize| -> Vec<SystemRegion> {
        (0..n)
            .map(|k| SystemRegion {
                row_start: 20 + 90 * k,
                row_end: 90 + 90 * k,
                col_start: 10,
                col_end: 190,
                order_index: k,
            })
            .collect()
    };
    vec![
        PageSystems {
            piece: piece.clone(),
            source_page: "p1".into(),
            regions: regions(3),
        },
        PageSystems {
            piece,
            source_page: "p2".into(),
            regions: regions(2),
        },
    ]
}

#[test]
fn dataset_tree_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = build_manifest("composer-fixed", &pages()).unwrap();
    let load = |_: &str| Ok(textured(300, 200));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let written = write_dataset(&manifest, &a, load).unwrap();
    write_dataset(&manifest, &b, load).unwrap();
    let tree = support::read_tree(&a);
    assert_eq!(tree, support::read_tree(&b));
    let names: Vec<_> = tree
        .keys()
        .map(|p| p.to_string_lossy().into_owned())
        .collect();
    assert_eq!(
        names,
        [
            "composer-fixed/manifest.json",
            "composer-fixed/op28-no4/0001.jpg",
            "composer-fixed/op28-no4/0002.jpg",
            "composer-fixed/op28-no4/0003.jpg",
            "composer-fixed/op28-no4/0004.jpg",
            "composer-fixed/op28-no4/0005.jpg",
        ]
    );
    let back: DatasetManifest = serde_json::from_slice(&std::fs::read(written).unwrap()).unwrap();
    assert_eq!(back, manifest);
    let numbers: Vec<_> = back.samples.iter().map(|s| s.meta.system_number).collect();
    assert_eq!(numbers, [1, 2, 3, 4, 5]);
}
