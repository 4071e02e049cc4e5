//! Shared fixtures for the benchmarks.

use platecont_core::expr::Expr;
use platecont_core::geometry::BoundaryGraph;
use platecont_core::plate::PlateMaterial;

pub const CURVED_GRAPH: &str = "0.1*r0*sin(x/r0)*(x/r0)^2";

pub fn unit_material() -> PlateMaterial {
    PlateMaterial::constant(1.0, 1.0, 1.0)
}

pub fn outer_y2() -> Expr {
    Expr::parse("y^2").expect("valid expression")
}

pub fn curved_graph() -> BoundaryGraph {
    BoundaryGraph::from_expr(CURVED_GRAPH, 1.0, 12.0, 1.0).expect("admissible graph")
}
