use std::io::Write;

use flate2::write::GzEncoder;
use flate2::Compression;
use gated_rnn::data::{
    batch_indices, read_idx_images, read_idx_labels, to_sequences, write_idx_images,
    write_idx_labels, IdxImages,
};
use gated_rnn::Error;
use proptest::prelude::*;

fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
    let mut out = magic.to_be_bytes().to_vec();
    for d in dims {
        out.extend_from_slice(&d.to_be_bytes());
    }
    out
}

fn format_offset(e: Error) -> u64 {
    match e {
        Error::Format { offset, .. } => offset,
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn empty_image_file_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty");
    std::fs::write(&path, header(2051, &[0, 28, 28])).unwrap();
    let imgs = read_idx_images(&path).unwrap();
    assert_eq!((imgs.count, imgs.rows, imgs.cols), (0, 28, 28));
    assert!(imgs.pixels.is_empty());
}

#[test]
fn hand_built_file_parses() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("imgs");
    let mut bytes = header(2051, &[2, 1, 3]);
    bytes.extend_from_slice(&[0, 128, 255, 1, 2, 3]);
    std::fs::write(&path, bytes).unwrap();
    let imgs = read_idx_images(&path).unwrap();
    assert_eq!(imgs.pixels, vec![0, 128, 255, 1, 2, 3]);
    assert_eq!((imgs.count, imgs.rows, imgs.cols), (2, 1, 3));
}

#[test]
fn wrong_magic_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels-as-images");
    let mut bytes = header(2049, &[1]);
    bytes.push(3);
    std::fs::write(&path, &bytes).unwrap();
    assert_eq!(format_offset(read_idx_images(&path).unwrap_err()), 0);
    assert_eq!(read_idx_labels(&path).unwrap(), vec![3]);
}

#[test]
fn truncation_reports_its_offset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short");
    let mut bytes = header(2051, &[2, 2, 2]);
    bytes.extend_from_slice(&[1, 2, 3]);
    std::fs::write(&path, &bytes).unwrap();
    assert_eq!(format_offset(read_idx_images(&path).unwrap_err()), 16);

    std::fs::write(&path, header(2051, &[2])).unwrap();
    assert_eq!(format_offset(read_idx_images(&path).unwrap_err()), 8);
}

#[test]
fn out_of_range_label_is_rejected_at_its_byte() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels");
    let mut bytes = header(2049, &[3]);
    bytes.extend_from_slice(&[9, 0, 10]);
    std::fs::write(&path, &bytes).unwrap();
    assert_eq!(format_offset(read_idx_labels(&path).unwrap_err()), 10);
}

#[test]
fn gzip_files_are_read_transparently() {
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("plain");
    let images = IdxImages {
        count: 3,
        rows: 2,
        cols: 2,
        pixels: (0..12).collect(),
    };
    write_idx_images(&plain, &images).unwrap();
    let mut enc = GzEncoder::new(Vec::new(), Compression::default());
    enc.write_all(&std::fs::read(&plain).unwrap()).unwrap();
    let gz = dir.path().join("plain.gz");
    std::fs::write(&gz, enc.finish().unwrap()).unwrap();
    assert_eq!(read_idx_images(&gz).unwrap(), images);
}

#[test]
fn label_image_count_mismatch_is_detected() {
    let images = IdxImages {
        count: 2,
        rows: 1,
        cols: 1,
        pixels: vec![0, 1],
    };
    assert!(matches!(
        to_sequences(images, &[1], None),
        Err(Error::Consistency(_))
    ));
}

fn images() -> impl Strategy<Value = IdxImages> {
    (0usize..6, 1usize..5, 1usize..5).prop_flat_map(|(count, rows, cols)| {
        prop::collection::vec(any::<u8>(), count * rows * cols).prop_map(move |pixels| IdxImages {
            count,
            rows,
            cols,
            pixels,
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_then_read_is_exact(imgs in images(), labels in prop::collection::vec(0u8..10, 0..20)) {
        let dir = tempfile::tempdir().unwrap();
        write_idx_images(dir.path().join("i"), &imgs).unwrap();
        write_idx_labels(dir.path().join("l"), &labels).unwrap();
        prop_assert_eq!(read_idx_images(dir.path().join("i")).unwrap(), imgs);
        prop_assert_eq!(read_idx_labels(dir.path().join("l")).unwrap(), labels);
    }

    #[test]
    fn sequences_are_scaled_rows(imgs in images()) {
        prop_assume!(imgs.count > 0);
        let labels = vec![0u8; imgs.count];
        let (rows, cols) = (imgs.rows, imgs.cols);
        let pixels = imgs.pixels.clone();
        let split = to_sequences(imgs, &labels, None).unwrap();
        for i in 0..split.len() {
            let seq = split.sequence(i);
            prop_assert_eq!(seq.len(), rows);
            for (r, row) in seq.iter().enumerate() {
                prop_assert_eq!(row.len(), cols);
                for (c, &v) in row.as_slice().iter().enumerate() {
                    prop_assert!((0.0..=1.0).contains(&v));
                    prop_assert_eq!(v, pixels[(i * rows + r) * cols + c] as f64 / 255.0);
                }
            }
        }
    }

    #[test]
    fn batches_partition_the_examples(n in 0usize..300, bs in 1usize..40, seed in any::<u64>(), epoch in 0u64..50) {
        let batches = batch_indices(n, bs, seed, epoch).unwrap();
        prop_assert_eq!(batches.len(), n.div_ceil(bs));
        if let Some((last, full)) = batches.split_last() {
            prop_assert!(full.iter().all(|b| b.len() == bs));
            prop_assert!(!last.is_empty() && last.len() <= bs);
        }
        let mut all: Vec<usize> = batches.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(batches, batch_indices(n, bs, seed, epoch).unwrap());
    }
}
