use super::{AvConfig, AvError, DiagramOptions};
use crate::codesign::{Diagram, Implementation, Mdpi, Node};
use crate::design::{
    build_controller_relation, monotonize, BuildSettings, Catalog, EmpiricalRelation, Family, FrequencyMode, SimCache,
};
use crate::order::{Component, FiniteOrder, Order, Point, Poset, Value};
use crate::plant::VehicleParams;

/// Table nodes of the assembled diagram, in the order exports list them.
pub const NODE_NAMES: [&str; 5] = ["lateral", "longitudinal", "sensor", "computer", "vehicle"];

fn label_set(name: &str, labels: &[&str]) -> Component {
    Component::new(name, Order::discrete(FiniteOrder::discrete(labels.iter().copied())))
}

/// One implementation per sensor: it provides its noise scale (less noise is
/// more) and, with explicit frequencies, its update rate.
pub fn sensor_mdpi(catalog: &Catalog, mode: FrequencyMode) -> Result<Mdpi, AvError> {
    let mut f = vec![Component::opposite_real("v_scale")];
    if mode == FrequencyMode::Explicit {
        f.push(Component::real("frequency"));
    }
    let impls = catalog
        .sensors
        .iter()
        .map(|s| {
            let mut provides = vec![s.v_scale];
            if mode == FrequencyMode::Explicit {
                provides.push(s.max_frequency);
            }
            Implementation::new(&s.name, Point::reals(&provides), Point::reals(&[s.cost, s.power, s.mass]))
        })
        .collect();
    Ok(Mdpi::new("sensor", Poset::new(f), Poset::reals(["cost", "power", "mass"]), impls)?)
}

pub fn computer_mdpi(catalog: &Catalog) -> Result<Mdpi, AvError> {
    let impls = catalog
        .computers
        .iter()
        .map(|c| {
            Implementation::new(&c.name, Point::reals(&[c.compute_capacity]), Point::reals(&[c.cost, c.power, c.mass]))
        })
        .collect();
    Ok(Mdpi::new("computer", Poset::reals(["computation"]), Poset::reals(["cost", "power", "mass"]), impls)?)
}

/// Vehicle platform: its speed and curvature envelope and the power and
/// payload it can carry. Danger is a single-level placeholder.
pub fn vehicle_mdpi(options: &DiagramOptions, vehicle: &VehicleParams) -> Result<Mdpi, AvError> {
    let kappa_max = vehicle.delta_max.tan() / vehicle.wheelbase;
    let provides = Point::reals(&[vehicle.v_max, kappa_max, options.vehicle.power, options.vehicle.payload]);
    Ok(Mdpi::new(
        "vehicle",
        Poset::reals(["speed", "curvature", "power", "mass"]),
        Poset::new(vec![label_set("danger", &["none"])]),
        vec![Implementation {
            design: vec!["platform".into()],
            provides,
            requires: Point(vec![Value::label(0)]),
            dispersion: vec![],
        }],
    )?)
}

fn controller_node(m: &Mdpi, name: &str, mode: FrequencyMode) -> Result<Mdpi, AvError> {
    let expected = match mode {
        FrequencyMode::Neglected => "computation",
        FrequencyMode::Explicit => "frequency",
    };
    if m.resources.index_of(expected).is_none() {
        return Err(AvError::Config(format!(
            "{name} relation lacks the `{expected}` resource of the chosen frequency mode"
        )));
    }
    let mut out = m.functionality_to_resource("v_scale")?;
    out.name = name.to_string();
    Ok(out)
}

/// Wires the controller relations (functionality speed, curvature, w_scale,
/// drop_p, v_scale) to the sensor, computer and vehicle catalogs.
pub fn assemble_diagram(
    lateral: &Mdpi,
    longitudinal: &Mdpi,
    catalog: &Catalog,
    options: &DiagramOptions,
    vehicle: &VehicleParams,
) -> Result<Diagram, AvError> {
    catalog.validate()?;
    let mode = options.frequency_mode;
    let lat = controller_node(lateral, "lateral", mode)?;
    let lon = controller_node(longitudinal, "longitudinal", mode)?;
    let mut d = Diagram::default();
    d.add_node(Node::table(lat))
        .add_node(Node::table(lon))
        .add_node(Node::table(sensor_mdpi(catalog, mode)?))
        .add_node(Node::table(computer_mdpi(catalog)?))
        .add_node(Node::table(vehicle_mdpi(options, vehicle)?));
    let impl_inputs: &[&str] = match mode {
        FrequencyMode::Neglected => &["computation"],
        FrequencyMode::Explicit => &["load", "frequency"],
    };
    for c in ["lateral", "longitudinal"] {
        let node = format!("{c}_implementation");
        d.add_node(Node::product(node.as_str(), impl_inputs.iter().copied(), "computation", 1.0));
        for port in impl_inputs {
            d.connect(format!("{c}.{port}"), format!("{node}.{port}"));
        }
        if mode == FrequencyMode::Explicit {
            d.connect(format!("{c}.frequency"), "sensor.frequency");
        }
        d.connect(format!("{c}.v_scale"), "sensor.v_scale");
        d.connect(format!("{node}.computation"), format!("compute_total.{c}"));
    }
    d.add_node(Node::sum("compute_total", ["lateral", "longitudinal"], "computation"))
        .connect("compute_total.computation", "computer.computation");
    for q in ["cost", "power", "mass"] {
        let node = format!("{q}_total");
        d.add_node(Node::sum(node.as_str(), ["sensor", "computer"], q))
            .connect(format!("sensor.{q}"), format!("{node}.sensor"))
            .connect(format!("computer.{q}"), format!("{node}.computer"));
    }
    d.connect("power_total.power", "vehicle.power").connect("mass_total.mass", "vehicle.mass");
    d.add_node(Node::sum("discomfort_total", ["steering_rate", "accel"], "discomfort"))
        .connect("lateral.steering_rate_tot", "discomfort_total.steering_rate")
        .connect("longitudinal.accel_tot", "discomfort_total.accel");
    for (name, targets) in [
        ("speed", &["vehicle.speed", "lateral.speed", "longitudinal.speed"][..]),
        ("curvature", &["vehicle.curvature", "lateral.curvature", "longitudinal.curvature"][..]),
        ("w_scale", &["lateral.w_scale", "longitudinal.w_scale"][..]),
        ("drop_p", &["lateral.drop_p", "longitudinal.drop_p"][..]),
    ] {
        d.expose_functionality(name, targets.iter().copied());
    }
    d.expose_resource("cost", "cost_total.cost")
        .expose_resource("error", "lateral.e_p_tot")
        .expose_resource("effort", "lateral.delta_tot")
        .expose_resource("speed_error", "longitudinal.speed_err_tot")
        .expose_resource("discomfort", "discomfort_total.discomfort")
        .expose_resource("danger", "vehicle.danger");
    d.validate()?;
    Ok(d)
}

/// Controller relations and the diagram assembled from them.
#[derive(Debug, Clone)]
pub struct Study {
    pub config: AvConfig,
    pub catalog: Catalog,
    pub lateral_relation: EmpiricalRelation,
    pub longitudinal_relation: EmpiricalRelation,
    /// Monotonized relations, with noise scale still on the functionality side.
    pub lateral: Mdpi,
    pub longitudinal: Mdpi,
    pub diagram: Diagram,
}

impl Study {
    /// Simulates (or reads from `cache`) every configured controller on the design grid.
    pub fn build(config: &AvConfig, catalog: &Catalog, mut cache: Option<&mut SimCache>) -> Result<Study, AvError> {
        config.validate()?;
        let settings = config.settings();
        let tasks = config.design_grid.tasks(config.task.scenario);
        let mut lateral_params = Vec::new();
        for &f in &config.diagram.lateral_families {
            lateral_params.extend(config.grids.params(f)?);
        }
        let lat = build_controller_relation(
            "lateral",
            &lateral_params,
            &tasks,
            &config.design_grid.noise,
            &settings,
            cache.as_deref_mut(),
        )?;
        let lon = build_controller_relation(
            "longitudinal",
            &config.grids.params(Family::Pid)?,
            &tasks,
            &config.design_grid.noise,
            &settings,
            cache,
        )?;
        Study::from_relations(config, catalog, lat, lon)
    }

    pub fn from_relations(
        config: &AvConfig,
        catalog: &Catalog,
        lateral_relation: EmpiricalRelation,
        longitudinal_relation: EmpiricalRelation,
    ) -> Result<Study, AvError> {
        let settings = config.settings();
        let grid = functionality_grid(config, &settings);
        let lateral = monotonize(&lateral_relation, &grid)?;
        let longitudinal = monotonize(&longitudinal_relation, &grid)?;
        let diagram = assemble_diagram(&lateral, &longitudinal, catalog, &config.diagram, &settings.sim.vehicle)?;
        Ok(Study {
            config: config.clone(),
            catalog: catalog.clone(),
            lateral_relation,
            longitudinal_relation,
            lateral,
            longitudinal,
            diagram,
        })
    }
}

/// Grid points (speed, curvature, w_scale, drop_p, v_scale) of the design grid.
fn functionality_grid(config: &AvConfig, settings: &BuildSettings) -> Vec<Point> {
    let mut out = Vec::new();
    for task in config.design_grid.tasks(config.task.scenario) {
        let kappa = settings.paths.curvature(task.curvature);
        for c in config.design_grid.noise.cells() {
            out.push(Point::reals(&[task.speed, kappa, c.w_scale, c.drop_p, c.v_scale]));
        }
    }
    out
}
