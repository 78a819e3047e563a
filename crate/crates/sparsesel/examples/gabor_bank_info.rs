//! Prints the standard Gabor bank geometry: per-scale kernel sizes and
//! frequencies, the DC correction residual, and how flat feature indices map
//! back to (kernel, position) on the sampling lattice.

use sparsesel::gabor::{
    feature_position, GaborBank, DOWNSAMPLE, FEATURE_LEN, FULL_RESPONSE_COUNT, GRID, IMAGE_SIZE,
    KERNEL_COUNT, ORIENTATIONS, SCALES, STRIDE,
};

fn main() {
    let bank = GaborBank::standard();
    println!(
        "{} kernels: {} orientations x {} scales on {}x{} images",
        KERNEL_COUNT,
        ORIENTATIONS,
        SCALES.len(),
        IMAGE_SIZE,
        IMAGE_SIZE
    );
    println!();
    println!(
        "{:>4} {:>7} {:>10} {:>12} {:>12} {:>12}",
        "nu", "width", "wavenumber", "wavelength", "env. std", "worst dc"
    );
    for &nu in &SCALES {
        let kernels: Vec<_> = bank.kernels().iter().filter(|k| k.spec.nu == nu).collect();
        let k0 = kernels[0];
        let wn = k0.spec.wavenumber();
        let worst_dc = kernels
            .iter()
            .map(|k| {
                let (re, im) = k.dc_sum();
                (re * re + im * im).sqrt() / k.abs_sum()
            })
            .fold(0.0_f64, f64::max);
        println!(
            "{:>4} {:>7} {:>10.4} {:>12.3} {:>12.3} {:>12.2e}",
            nu,
            k0.width(),
            wn,
            std::f64::consts::TAU / wn,
            k0.spec.sigma / wn,
            worst_dc
        );
    }

    println!();
    println!("feature vector per image:");
    println!("  full magnitude field: {KERNEL_COUNT} x {IMAGE_SIZE} x {IMAGE_SIZE} = {FULL_RESPONSE_COUNT}");
    println!("  lattice stride {STRIDE} -> {GRID} x {GRID} positions, downsample factor {DOWNSAMPLE}");
    println!("  stored features: {KERNEL_COUNT} x {GRID} x {GRID} = {FEATURE_LEN}");

    println!();
    println!("flat index -> lattice position:");
    for index in [0, GRID * GRID - 1, FEATURE_LEN / 2, FEATURE_LEN - 1] {
        let p = feature_position(index);
        println!(
            "  {index:>5} -> kernel {:>2} (scale {}, orientation {}), pixel ({:>2}, {:>2})",
            p.kernel,
            SCALES[p.scale_index],
            p.orientation,
            p.row,
            p.col
        );
    }
}
