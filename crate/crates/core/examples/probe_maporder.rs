use solq::classical::*;
use solq::correlation::*;
use solq::grid::TimeGrid;
use std::f64::consts::FRAC_PI_2;

fn main() {
    let g = TimeGrid::new(1024, 20.0).unwrap();
    let spec = SolitonPairSpec::new(1.0, FRAC_PI_2, 3.5).unwrap();
    let u = init_scalar_pair(&spec, &g).unwrap();
    let part = SlotPartition::uniform(&g, -8.0, 8.0, 0.1).unwrap();
    let map_at = |h: f64| {
        let traj = propagate_scalar(&u, 6.0, h).unwrap();
        correlation_map(&traj, 6.0, &part, 1.0).unwrap()
    };
    let m1 = map_at(1e-3);
    let m2 = map_at(5e-4);
    let m3 = map_at(2.5e-4);
    let dev = |a: &CorrelationMap, b: &CorrelationMap| {
        a.c.iter().zip(b.c.iter()).map(|(x, y)| (x - y).abs()).fold(0.0f64, f64::max)
    };
    let d12 = dev(&m1, &m2);
    let d23 = dev(&m2, &m3);
    println!("dC(1e-3 -> 5e-4)   = {d12:.4e}");
    println!("dC(5e-4 -> 2.5e-4) = {d23:.4e}");
    println!("ratio = {:.2}", d12 / d23);
}
