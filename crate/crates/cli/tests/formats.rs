use fld::image_io::{read_pfm, read_ppm, write_pfm, write_ppm};
use fld::vgrd::{read_vgrd, write_vgrd};
use fld_core::raymarch::{tonemap, HdrImage};
use fld_core::{GridDims, ScalarField};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = ScalarField> {
    (3usize..7, 3usize..7, 3usize..7, 0.01f64..2.0).prop_flat_map(|(nx, ny, nz, dl)| {
        proptest::collection::vec(-1e6f32..1e6f32, nx * ny * nz).prop_map(move |vals| {
            let d = GridDims::new(nx, ny, nz, dl).unwrap();
            ScalarField::from_vec(d, vals.into_iter().map(f64::from).collect()).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn vgrd_round_trip_is_bit_exact(field in grid_strategy()) {
        let mut bytes = Vec::new();
        write_vgrd(&mut bytes, &field).unwrap();
        let back = read_vgrd(&bytes[..]).unwrap();
        prop_assert_eq!(&back, &field);
        let mut again = Vec::new();
        write_vgrd(&mut again, &back).unwrap();
        prop_assert_eq!(again, bytes);
    }

    #[test]
    fn pfm_round_trip_is_bit_exact(w in 1usize..6, h in 1usize..6, seed in proptest::collection::vec(0f32..100.0, 108)) {
        let pixels = (0..w * h).map(|i| [seed[3 * i] as f64, seed[3 * i + 1] as f64, seed[3 * i + 2] as f64]).collect();
        let img = HdrImage::from_pixels(w, h, pixels).unwrap();
        let mut bytes = Vec::new();
        write_pfm(&mut bytes, &img).unwrap();
        let back = read_pfm(&bytes[..]).unwrap();
        prop_assert_eq!(&back, &img);
        let mut again = Vec::new();
        write_pfm(&mut again, &back).unwrap();
        prop_assert_eq!(again, bytes);
    }
}

#[test]
fn vgrd_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = GridDims::new(4, 3, 5, 0.125).unwrap();
    let f = ScalarField::from_fn(d, |v| (v.i + 10 * v.j + 100 * v.k) as f64 * 0.5);
    let path = dir.path().join("f.vgrd");
    fld::vgrd::save(&path, &f).unwrap();
    assert_eq!(fld::vgrd::load(&path).unwrap(), f);
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 28 + 4 * 60);
}

#[test]
fn ppm_round_trip_of_tonemapped_image() {
    let img = HdrImage::from_pixels(2, 2, vec![[0.0; 3], [0.25; 3], [0.5; 3], [2.0; 3]]).unwrap();
    let ldr = tonemap(&img, 1.0, 1.0).unwrap();
    let mut bytes = Vec::new();
    write_ppm(&mut bytes, &ldr).unwrap();
    assert_eq!(read_ppm(&bytes[..]).unwrap(), ldr);
    assert_eq!(ldr.data, vec![0, 0, 0, 64, 64, 64, 128, 128, 128, 255, 255, 255]);
}
