//! The scenario queries Q1–Q4 encoded as plan documents, and the toy
//! cache of the containment walk-through.

use sqf_core::cache::CachedQuery;
use sqf_core::placement::{CacheNetwork, Topology};
use sqf_core::{parse_plan, QueryEvaluationTree};

pub const Q1_PLAN1: &str = "\
sqf-plan 1
query Q1
sub q11 ; R employee@DB1, project@DB1 ; A employee.empId, project.projName, project.projId, project.empId ; P employee.empId = project.empId ; V 4
sub q12 ; R estimation@DB2 ; A estimation.projId, estimation.projLoc ; P estimation.cost < 50000 ; V 2
sub q13 ; R qr11, qr12 ; A qr11.projName, qr12.projLoc ; P qr11.projId = qr12.projId ; V 1
node r ; R employee@DB1, estimation@DB2, project@DB1 ; A employee.empName, estimation.projLoc, project.projName ; P employee.empId = project.empId & project.projId = estimation.projId & estimation.cost < 50000 ; V 1 ; H QR1
expr (((q11) ∥ (q12)) _ (q13))
end
";

pub const Q1_PLAN2: &str = "\
sqf-plan 1
query Q1b
sub q14 ; R employee@DB1 ; A employee.empId, employee.empName ; V 3
sub q15 ; R project@DB1, estimation@DB2 ; A project.projName, project.empId, estimation.projLoc ; P project.projId = estimation.projId & estimation.cost < 50000 ; V 3
sub q16 ; R qr14, qr15 ; A qr14.empName, qr15.projName, qr15.projLoc ; P qr14.empId = qr15.empId ; V 1
node r ; R employee@DB1, estimation@DB2, project@DB1 ; A employee.empName, estimation.projLoc, project.projName ; P employee.empId = project.empId & project.projId = estimation.projId & estimation.cost < 50000 ; V 1 ; H QR1
expr (((q14) ∥ (q15)) _ (q16))
end
";

pub const Q2: &str = "\
sqf-plan 1
query Q2
sub q21 ; R employee@DB1, project@DB1 ; A project.projName, project.projId ; P employee.empId = project.empId & employee.age > 45 ; V 2
sub q22 ; R estimation@DB2 ; A estimation.projId ; P estimation.cost < 50000 ; V 1
sub q23 ; R qr21, qr22 ; A qr21.projName ; P qr21.projId = qr22.projId ; V 1
expr (((q21) ∥ (q22)) _ (q23))
end
";

pub const Q3: &str = "\
sqf-plan 1
query Q3
sub q31 ; R employee@DB1 ; A employee.empName, employee.age ; P employee.age > 45 ; V 1
expr (q31)
end
";

pub const Q4: &str = "\
sqf-plan 1
query Q4
sub q41 ; R Songs@Datastore1 ; A Songs.SongName ; V 1
sub q42 ; R Songs@Datastore2 ; A Songs.SongName ; V 1
expr ((q41) ∥ (q42))
end
";

pub fn plan(text: &str) -> QueryEvaluationTree {
    parse_plan(text).expect("example plan parses")
}

pub fn one_unit_network() -> CacheNetwork {
    let topo = Topology::complete(&["c1"], &["u1"], &["DB1"]).unwrap();
    CacheNetwork::new(topo, 1000.0)
}

fn leaf_line(id: &str) -> String {
    format!("sub {id} ; R t{id}@DB1 ; A t{id}.x ; V 1\n")
}

pub fn toy(query: &str, leaves: &[&str], expr: &str) -> QueryEvaluationTree {
    let mut doc = format!("sqf-plan 1\nquery {query}\n");
    for l in leaves {
        doc.push_str(&leaf_line(l));
    }
    doc.push_str(&format!("expr {expr}\nend\n"));
    plan(&doc)
}

/// T1 = ((q1 ∥ q2) _ q3), T2 = (q4 ∥ q5 ∥ q6), T3 = (q6 ∥ q9), all at `c1`.
pub fn walkthrough_cache() -> CacheNetwork {
    let mut net = one_unit_network();
    let unit = net.unit_mut("c1").unwrap();
    for t in [
        toy("T1", &["q1", "q2", "q3"], "((q1 ∥ q2) _ (q3))"),
        toy("T2", &["q4", "q5", "q6"], "((q4) ∥ (q5) ∥ (q6))"),
        toy("T3", &["q6", "q9"], "((q6) ∥ (q9))"),
    ] {
        unit.admit(CachedQuery::new(t, "c1"), 0.0).unwrap();
    }
    net
}
