//! Thresholds, class codes, and the bit mapping: the modulation alphabet.
//!
//! ```bash
//! cargo run --example encode_decode
//! ```

use opsk::perceptual::{
    bits_to_class, build_thresholds, class_to_bits, classify, BitAllocation, PerceptualVector,
};

fn main() {
    // 4 bits per symbol: 2 on pleasantness, 1 on intensity, 1 on edibility.
    let alloc = BitAllocation::new(2, 1, 1).unwrap();
    println!("allocation {alloc}: {} classes\n", alloc.total_classes());

    for (dim, n) in [("pleasantness", 2), ("intensity", 1), ("edibility", 1)] {
        let t = build_thresholds(n).unwrap();
        println!("{dim:>13} thresholds: {:?}", t.values());
    }

    println!("\nclassifying example odors:");
    for (p, i, e) in [(10.0, 15.0, 5.0), (70.0, 25.0, 95.0), (99.9, 49.9, 50.0)] {
        let v = PerceptualVector::new(p, i, e).unwrap();
        let code = classify(&v, &alloc);
        let bits: String = class_to_bits(&code, &alloc)
            .unwrap()
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect();
        println!("  ({p:>5.1}, {i:>5.1}, {e:>5.1}) -> {code} -> bits {bits}");
    }

    println!("\nbit group -> class -> bit group round trip:");
    let bits = [true, true, false, true];
    let code = bits_to_class(&bits, &alloc).unwrap();
    let back = class_to_bits(&code, &alloc).unwrap();
    println!(
        "  1101 -> {code} -> {}",
        back.iter()
            .map(|&b| u8::from(b))
            .fold(String::new(), |acc, b| acc + &b.to_string())
    );
    assert_eq!(back, bits);
}
