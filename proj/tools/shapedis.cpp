#include "shapedis/common/error.hpp"
#include "shapedis/common/tensor.hpp"
#include "shapedis/pipeline/commands.hpp"
#include "shapedis/pipeline/reproduce.hpp"

#include "CLI11.hpp"

#include <functional>
#include <iostream>
#include <string>

using namespace shapedis;

namespace {

struct Flags {
    std::string config;
    std::string run_id = "default";
    std::uint64_t seed = 0;
    bool has_seed = false;
    bool deterministic = false;
    bool force = false;
    std::string ablation = "full";
};

void add_common(CLI::App* sub, Flags& f, bool with_ablation) {
    sub->add_option("--config", f.config, "TOML config file")->check(CLI::ExistingFile);
    sub->add_option("--run-id", f.run_id, "run directory name under $SHAPEDIS_RUNS_DIR (default ./runs)");
    sub->add_option("--seed", f.seed, "global seed override")->each([&](const std::string&) { f.has_seed = true; });
    sub->add_flag("--deterministic", f.deterministic, "single-threaded deterministic kernels");
    sub->add_flag("--force", f.force, "overwrite existing outputs");
    if (with_ablation) {
        sub->add_option("--ablation", f.ablation, "stage-2 variant")
            ->check(CLI::IsMember(pipeline::ablation_names()));
    }
}

pipeline::CommandOptions to_options(const Flags& f) {
    pipeline::CommandOptions o;
    o.run_id = f.run_id;
    if (!f.config.empty()) o.config = pipeline::load_config(f.config);
    if (f.has_seed) o.seed = f.seed;
    o.force = f.force;
    o.ablation = f.ablation;
    o.log = &std::cerr;
    return o;
}

int exit_code(const Error& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const DependencyError*>(&e)) return 3;
    if (dynamic_cast<const InputError*>(&e) || dynamic_cast<const FormatError*>(&e)) return 4;
    if (dynamic_cast<const NumericalError*>(&e)) return 5;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shapedis: disentangle disease from aging in 3D shapes"};
    app.require_subcommand(1);
    Flags flags;
    std::function<void()> action;

    struct Sub {
        const char* name;
        const char* help;
        bool ablation;
        void (*run)(const pipeline::CommandOptions&);
    };
    const Sub subs[] = {
        {"make-data", "generate or import the cohort and sample SDF caches", false, pipeline::cmd_make_data},
        {"train-stage1", "fit the auto-decoder with the mixture prior", false, pipeline::cmd_train_stage1},
        {"cluster", "EM on stage-1 codes, write pseudo labels", false, pipeline::cmd_cluster},
        {"train-stage2", "train the disentangling VAE for each seed", true, pipeline::cmd_train_stage2},
        {"eval", "write metrics.json and table2.csv", true, pipeline::cmd_eval},
        {"traverse", "export disease and age traversal meshes", true, pipeline::cmd_traverse},
    };
    for (const auto& s : subs) {
        auto* sub = app.add_subcommand(s.name, s.help);
        add_common(sub, flags, s.ablation);
        auto run = s.run;
        sub->callback([&, run] { action = [&, run] { run(to_options(flags)); }; });
    }

    auto* orphans = app.add_subcommand("orphans", "list files no manifest entry accounts for");
    add_common(orphans, flags, false);
    int orphan_count = 0;
    orphans->callback([&] {
        action = [&] {
            for (const auto& p : pipeline::cmd_orphans(to_options(flags))) {
                std::cout << p << "\n";
                ++orphan_count;
            }
        };
    });

    auto* reproduce = app.add_subcommand("reproduce", "rebuild a results table end to end");
    add_common(reproduce, flags, false);
    int table = 1;
    std::string scale = "desk";
    reproduce->add_option("--table", table, "table number")->check(CLI::IsMember({1, 2, 3}));
    reproduce->add_option("--scale", scale, "preset")->check(CLI::IsMember({"desk"}));
    reproduce->callback([&] {
        action = [&] {
            pipeline::ReproduceOptions ro;
            ro.table = table;
            ro.scale = scale;
            ro.base = to_options(flags);
            if (flags.run_id == "default") ro.base.run_id = "default";
            const auto rep = pipeline::cmd_reproduce(ro);
            std::cout << "wrote " << (rep.dir / ("tables/table" + std::to_string(table) + ".csv")).string() << "\n";
        };
    });

    CLI11_PARSE(app, argc, argv);
    try {
        if (flags.deterministic) set_deterministic(flags.has_seed ? flags.seed : 0);
        action();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return orphan_count > 0 ? 6 : 0;
}
