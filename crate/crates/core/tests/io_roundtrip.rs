use ndarray::Array2;
use proptest::prelude::*;

use radiofill::io::{read_grid_file, read_mask_file, write_flag_file, write_grid_file};

proptest! {
    #[test]
    fn grid_files_round_trip(rows in 1usize..8, cols in 1usize..8, seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let values = Array2::from_shape_fn((rows, cols), |(r, c)| {
            let h = seed.wrapping_mul(6364136223846793005).wrapping_add((r * 31 + c) as u64);
            (h >> 11) as f64 / (1u64 << 53) as f64 * 1e-3
        });
        let path = dir.path().join("g.csv");
        write_grid_file(&path, &values).unwrap();
        prop_assert_eq!(&read_grid_file(&path).unwrap(), &values);

        let flags = values.mapv(|v| v > 5e-4);
        let fpath = dir.path().join("m.csv");
        write_flag_file(&fpath, &flags).unwrap();
        prop_assert_eq!(read_mask_file(&fpath).unwrap(), flags);
    }
}
