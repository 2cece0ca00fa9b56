use std::collections::BTreeSet;
use std::path::Path;

use hexsr::config::SyntheticData;
use hexsr::dataset::{ingest_dataset, synthetic_dataset, DatasetSplit, ImageSource, Split};
use hexsr::error::Error;

fn touch(dir: &Path, name: &str) {
    std::fs::write(dir.join(name), b"").unwrap();
}

fn ids(list: &[ImageSource]) -> Vec<u32> {
    list.iter().map(ImageSource::id).collect()
}

#[test]
fn default_split_partitions_nine_hundred_images() {
    let dir = tempfile::tempdir().unwrap();
    for id in (1..=900).rev() {
        touch(dir.path(), &format!("{id:04}.png"));
    }
    touch(dir.path(), "README.txt");
    touch(dir.path(), "notes.png");
    let ds = ingest_dataset(dir.path(), &DatasetSplit::default()).unwrap();
    assert_eq!((ds.train.len(), ds.val.len(), ds.test.len()), (800, 10, 90));
    assert_eq!(ids(&ds.test), (811..=900).collect::<Vec<_>>());
    assert_eq!(ids(&ds.train), (1..=800).collect::<Vec<_>>());
    let all: BTreeSet<u32> = ids(&ds.train).into_iter().chain(ids(&ds.val)).chain(ids(&ds.test)).collect();
    assert_eq!(all.len(), 900);
    assert_eq!(ds.test[0].name(), "0811");
}

#[test]
fn split_membership() {
    let s = DatasetSplit::default();
    assert_eq!(s.split_of(1), Some(Split::Train));
    assert_eq!(s.split_of(805), Some(Split::Val));
    assert_eq!(s.split_of(900), Some(Split::Test));
    assert_eq!(s.split_of(0), None);
    assert_eq!(s.split_of(901), None);
}

#[test]
fn overlapping_or_empty_ranges_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let overlap = DatasetSplit {
        train: [1, 10],
        val: [10, 12],
        test: [13, 20],
    };
    assert!(matches!(ingest_dataset(dir.path(), &overlap), Err(Error::Config(_))));
    let empty = DatasetSplit {
        train: [5, 1],
        val: [6, 7],
        test: [8, 9],
    };
    assert!(matches!(empty.validate(), Err(Error::Config(_))));
}

#[test]
fn empty_directory_reports_first_missing_id() {
    let dir = tempfile::tempdir().unwrap();
    match ingest_dataset(dir.path(), &DatasetSplit::default()) {
        Err(Error::MissingFile { id, dir: d }) => {
            assert_eq!(id, 1);
            assert_eq!(d, dir.path());
        }
        other => panic!("expected missing file, got {other:?}"),
    }
    let small = DatasetSplit {
        train: [1, 2],
        val: [3, 3],
        test: [4, 5],
    };
    for id in [1, 2, 3, 5] {
        touch(dir.path(), &format!("{id}.png"));
    }
    assert!(matches!(
        ingest_dataset(dir.path(), &small),
        Err(Error::MissingFile { id: 4, .. })
    ));
}

#[test]
fn unknown_and_duplicate_ids_are_rejected() {
    let small = DatasetSplit {
        train: [1, 2],
        val: [3, 3],
        test: [4, 4],
    };
    let dir = tempfile::tempdir().unwrap();
    for id in 1..=4 {
        touch(dir.path(), &format!("{id:04}.png"));
    }
    ingest_dataset(dir.path(), &small).unwrap();
    touch(dir.path(), "0009.png");
    assert!(matches!(ingest_dataset(dir.path(), &small), Err(Error::Dataset(_))));
    std::fs::remove_file(dir.path().join("0009.png")).unwrap();
    touch(dir.path(), "2.PNG");
    assert!(matches!(ingest_dataset(dir.path(), &small), Err(Error::Dataset(_))));
}

#[test]
fn unreadable_image_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    touch(dir.path(), "0007.png");
    let src = ImageSource::File {
        id: 7,
        path: dir.path().join("0007.png"),
    };
    let err = src.load(1.0).unwrap_err();
    assert!(err.to_string().contains("0007.png"), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn synthetic_ids_are_consecutive_and_unique() {
    let cfg = SyntheticData::default();
    let ds = synthetic_dataset(&cfg);
    assert_eq!(ds.train.len(), cfg.train);
    assert_eq!(ds.val.len(), cfg.val);
    assert_eq!(ds.test.len(), cfg.test.len());
    let all: Vec<u32> = ids(&ds.train).into_iter().chain(ids(&ds.val)).chain(ids(&ds.test)).collect();
    assert_eq!(all, (1..=all.len() as u32).collect::<Vec<_>>());
    let img = ds.val[0].load(1.0).unwrap();
    assert_eq!((img.channels(), img.height(), img.width()), (3, cfg.size, cfg.size));
    assert_eq!(synthetic_dataset(&cfg), ds);
}
