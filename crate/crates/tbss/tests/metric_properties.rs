mod common;

use common::{oracle_hausdorff, random_points, rng};
use tbss::metrics::{directed_hausdorff, hausdorff};

#[test]
fn hausdorff_equals_quadratic_oracle_bit_for_bit() {
    let mut rng = rng(71);
    for _ in 0..300 {
        let a = random_points(&mut rng, 60, 64);
        let b = random_points(&mut rng, 60, 64);
        assert_eq!(hausdorff(&a, &b).unwrap(), oracle_hausdorff(&a, &b));
    }
}

#[test]
fn hausdorff_axioms_on_random_pairs() {
    let mut rng = rng(72);
    for _ in 0..300 {
        let a = random_points(&mut rng, 40, 48);
        let b = random_points(&mut rng, 40, 48);
        let ab = hausdorff(&a, &b).unwrap();
        assert!(ab >= 0.0);
        assert_eq!(ab, hausdorff(&b, &a).unwrap());
        let mut sa: Vec<_> = a.clone();
        let mut sb: Vec<_> = b.clone();
        sa.sort_unstable();
        sa.dedup();
        sb.sort_unstable();
        sb.dedup();
        assert_eq!(ab == 0.0, sa == sb, "zero iff equal as sets");
    }
}

#[test]
fn hausdorff_triangle_inequality_on_random_triples() {
    let mut rng = rng(73);
    for _ in 0..200 {
        let a = random_points(&mut rng, 30, 40);
        let b = random_points(&mut rng, 30, 40);
        let c = random_points(&mut rng, 30, 40);
        let ab = hausdorff(&a, &b).unwrap();
        let bc = hausdorff(&b, &c).unwrap();
        let ac = hausdorff(&a, &c).unwrap();
        assert!(ac <= ab + bc + 1e-12, "ac {ac} > ab {ab} + bc {bc}");
    }
}

#[test]
fn directed_distance_is_order_invariant() {
    let mut rng = rng(74);
    for _ in 0..100 {
        let a = random_points(&mut rng, 30, 40);
        let b = random_points(&mut rng, 30, 40);
        let mut shuffled_a = a.clone();
        shuffled_a.reverse();
        let mut shuffled_b = b.clone();
        shuffled_b.rotate_left(b.len() / 2);
        assert_eq!(
            directed_hausdorff(&a, &b).unwrap(),
            directed_hausdorff(&shuffled_a, &shuffled_b).unwrap()
        );
    }
}
