//! Parses a program, prints it back and lists its loop heads and the
//! points an analysis records.

use invcmp::engine::{analyze, widening_points, AnalysisConfig, DomainKind};
use invcmp::ir::parse_program;

const SRC: &str = "
proc count(i, n) {
entry:
  n := ?;
  assume (n >= 0);
  i := 0;
  goto head;
head:
  if (i < n) body else done;
body:
  i := i + 1;
  goto head;
done:
  return;
}";

fn main() {
    let p = parse_program(SRC).expect("valid program");
    print!("{p}");
    let heads: Vec<&str> = widening_points(&p).iter().map(|&b| p.blocks[b].label.as_str()).collect();
    println!("loop heads: {heads:?}");
    let r = analyze(&p, &AnalysisConfig::new("Z", DomainKind::Zones)).unwrap();
    for (pt, rec) in &r.points {
        println!("{:<10} dv={:<12} {}", pt.display(&p), format!("{:?}", rec.dv), rec.invariant.formula);
    }
    match parse_program("proc p(q) { entry: q := r; return; }") {
        Err(e) => println!("error example: {e}"),
        Ok(_) => unreachable!(),
    }
}
