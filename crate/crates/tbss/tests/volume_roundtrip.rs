mod common;

use proptest::prelude::*;

use tbss::volume::{
    load_label_volume, load_probability_volume, save_label_volume, save_probability_volume,
    split_channels, Dims, LabelVolume, ProbabilityVolume, INNER, OUTER,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probability_volume_round_trips_bit_exactly(
        slices in 0usize..4,
        rows in 1usize..6,
        cols in 1usize..6,
        seed in 0u64..10_000,
    ) {
        use rand::RngExt;
        let dims = Dims { slices, rows, cols };
        let mut r = common::rng(seed);
        let data: Vec<f32> = (0..dims.voxels()).map(|_| r.random_range(0.0..=1.0f32)).collect();
        let vol = ProbabilityVolume::new(dims, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.tbv");
        save_probability_volume(&vol, &path).unwrap();
        let back = load_probability_volume(&path).unwrap();
        prop_assert_eq!(back.dims(), dims);
        let bits = |v: &ProbabilityVolume| v.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&vol));
    }

    #[test]
    fn split_channels_inverts_label_assembly(
        slices in 1usize..4,
        rows in 1usize..6,
        cols in 1usize..6,
        seed in 0u64..10_000,
    ) {
        use rand::RngExt;
        let dims = Dims { slices, rows, cols };
        let mut r = common::rng(seed);
        let data: Vec<u8> = (0..dims.voxels()).map(|_| r.random_range(0..=2u8)).collect();
        let labels = LabelVolume::new(dims, data).unwrap();
        let (inner, outer) = split_channels(&labels);
        for s in 0..slices {
            for row in 0..rows {
                for col in 0..cols {
                    let l = labels.get(s, row, col);
                    prop_assert_eq!(inner.get(s, row, col), l == INNER);
                    prop_assert_eq!(outer.get(s, row, col), l == OUTER);
                }
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.tbv");
        save_label_volume(&labels, &path).unwrap();
        let back = load_label_volume(&path).unwrap();
        prop_assert_eq!(back.data(), labels.data());
    }
}
