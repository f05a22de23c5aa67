mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{random_dataset, rng};
use imcprompt::data::{split, Split, SplitFractions, Stratify};
use imcprompt::Error;

#[test]
fn partitions_all_small_datasets() {
    let mut r = rng(11);
    let fractions = [
        SplitFractions::default(),
        SplitFractions::new(0.5, 0.25, 0.25).unwrap(),
        SplitFractions::new(0.9, 0.1, 0.0).unwrap(),
    ];
    for n in 3..=50 {
        let d = random_dataset(&mut r, n, 2, 1 + n % 4);
        for seed in 0..100u64 {
            for f in fractions {
                for stratify in [Stratify::None, Stratify::Sample] {
                    let a = match split(&d, f, stratify, seed) {
                        Ok(a) => a,
                        Err(Error::SmallStratum { .. }) => continue,
                        Err(e) => panic!("{e}"),
                    };
                    let mut all = BTreeSet::new();
                    for s in Split::ALL {
                        for i in a.indices(s) {
                            assert!(all.insert(i), "index {i} in two splits");
                        }
                    }
                    assert_eq!(all.len(), n);
                    if stratify == Stratify::None {
                        let c = a.counts();
                        let got = |s| *c.get(&s).unwrap_or(&0) as f64;
                        let (tr, va) = (got(Split::Train), got(Split::Validation));
                        let want = f.validation / (f.train + f.validation);
                        if tr + va > 0.0 {
                            assert!(
                                (va - want * (tr + va)).abs() <= 1.0 + 1e-9,
                                "n={n} seed={seed} {c:?}"
                            );
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn whole_samples_and_determinism() {
    let mut r = rng(5);
    let d = random_dataset(&mut r, 100, 3, 10);
    let f = SplitFractions::new(0.8, 0.1, 0.1).unwrap();
    let a = split(&d, f, Stratify::Sample, 3).unwrap();
    let mut per_sample: BTreeMap<&str, BTreeSet<Split>> = BTreeMap::new();
    for (i, c) in d.cells().iter().enumerate() {
        per_sample.entry(&c.sample_id).or_default().insert(a.of(i));
    }
    assert!(per_sample.values().all(|s| s.len() == 1));
    assert_eq!(a, split(&d, f, Stratify::Sample, 3).unwrap());
    assert_eq!(
        a.checksum(&d),
        split(&d, f, Stratify::Sample, 3).unwrap().checksum(&d)
    );
}

#[test]
fn cell_type_strata_are_balanced() {
    let mut r = rng(6);
    let d = random_dataset(&mut r, 300, 3, 2);
    let a = split(&d, SplitFractions::default(), Stratify::CellType, 1).unwrap();
    let mut by_type: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (i, c) in d.cells().iter().enumerate() {
        let e = by_type.entry(c.cell_type.as_deref().unwrap()).or_default();
        e.0 += 1;
        e.1 += (a.of(i) == Split::Test) as usize;
    }
    for (n, test) in by_type.values() {
        assert!((*test as f64 - 0.1 * *n as f64).abs() <= 1.0);
    }
}
