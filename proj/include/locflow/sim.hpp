#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "locflow/scheduler.hpp"

namespace locflow {

// How output partitions spread between virtual clients. STRICT keeps every
// file where it was produced (pure locality: the whole pipeline collapses
// onto the generator's client). REPLICATE pushes each output to every
// client after upload. GET_INPUT evicts outputs to shared storage and lets
// idle clients pull partitions through the get-input path.
enum class SimMode { STRICT, REPLICATE, GET_INPUT };

const char* sim_mode_name(SimMode m);
SimMode sim_mode_from_name(const std::string& name);

struct StageCosts {
    double gen = 1;  // seconds per event
    double sim = 6;
    double digi = 2;
    double reco = 4;
};

struct SimConfig {
    std::uint32_t n_clients = 1;
    std::uint64_t events = 100; // multiple of 10
    StageCosts cost_per_event;
    double overhead_secs = 40;  // per executed task: request+download+upload latency
    double poll_interval = 5;   // idle client poll cadence; also the server tick
    std::uint64_t bytes_per_event = 1000; // output volume per event per stage
    std::uint64_t seed = 1;
    SimMode mode = SimMode::STRICT;
    double wait_window_secs = 40;
    std::uint64_t app_bytes = 1 << 20; // synthetic application blob size
    std::uint64_t env_bytes = 4096;    // synthetic environment blob size
    // Names resolvable by the get-input path even though no client and no
    // upstream stage produced them.
    std::map<std::string, FileId> external_inputs;
};

struct SimReport {
    std::uint64_t events = 0;
    std::uint32_t n_clients = 0;
    std::string mode;
    std::uint64_t seed = 0;
    double makespan_secs = 0;
    double baseline_secs = 0; // serial zero-overhead execution
    std::uint64_t messages_exchanged = 0;
    std::uint64_t bytes_moved_input = 0; // input bytes pulled by get-input runs
    std::uint64_t bytes_moved_other = 0; // app/env downloads, uploads, replication
    double locality_fraction = 1.0;      // executed jobs whose inputs were already local
    std::uint64_t completed = 0;
    std::uint64_t failed = 0;
    // Busy compute seconds per client (overhead excluded).
    std::vector<double> client_busy_secs;
};

// The four-stage Muon pipeline: 1 generation covering all events, then 10
// simulation / 10 digitization / 10 reconstruction workunits over tenth
// partitions, chained per partition. 31 workunits total.
// `get_input_app` (optional) is attached to every post-generation workunit.
// Throws Error(InvalidEventCount) unless events is a positive multiple of 10.
std::vector<Workunit> build_muon_pipeline(std::uint64_t events,
                                          const std::string& get_input_app = "");

// Installs the synthetic applications/environments the pipeline references.
void install_muon_catalog(SchedulerState& state, const SimConfig& config);

// Event-driven execution of the pipeline against the real scheduler with a
// virtual clock. Deterministic for a given config. A non-null `trace`
// collects every state transition for replay through the validators.
SimReport simulate(const SimConfig& config, const std::vector<Workunit>& pipeline,
                   std::vector<Transition>* trace = nullptr);
SimReport simulate(const SimConfig& config); // builds the Muon pipeline itself

double muon_baseline_secs(std::uint64_t events, const StageCosts& costs);
SimReport baseline_report(std::uint64_t events, const StageCosts& costs);

// CSV with one row per report; byte-stable for identical inputs.
std::string emit_report(const std::vector<SimReport>& reports);

} // namespace locflow
