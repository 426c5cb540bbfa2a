//! Loads a mobility log from CSV text and lists invariant violations.

use std::fs;

use corn::model::load_mobility_log_unchecked;

fn main() -> anyhow::Result<()> {
    let dir = std::env::temp_dir().join("corn-validate-example");
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("hcps.csv"), "hcp_id,type\np1,nurse\n")?;
    fs::write(dir.join("locations.csv"), "location_id,kind\nl1,s\nl2,s\n")?;
    fs::write(dir.join("visits.csv"), "hcp_id,location_id,start_s,end_s\np1,l1,0,60\np1,l2,30,90\n")?;
    let g = load_mobility_log_unchecked(&dir.join("visits.csv"), &dir.join("hcps.csv"), &dir.join("locations.csv"))?;
    for v in g.validate() {
        println!("{v}");
    }
    Ok(())
}
