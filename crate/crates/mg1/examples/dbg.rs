fn main() {
    let m = mg1::presets::pareto1();
    println!("block_a(0) = {:.17}", m.block_a(0).get(0,0));
    println!("expected    = {:.17}", 0.3 * (1.0 - 0.125f64));
    println!("tail_a(0)  = {:.17}", m.tail_a(0).get(0,0));
    println!("dbl(0)     = {:.17}", m.double_tail_a(0).unwrap().get(0,0));
    println!("zeta3-1    = {:.17}", 0.3*(1.2020569031595942854f64-1.0));
    let r = m.validate();
    println!("sigma      = {:.17}", r.sigma);
}
