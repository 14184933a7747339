// Copyright (c) 2026 The dcasim developers
// Distributed under the MIT software license, see the accompanying
// file LICENSE or http://www.opensource.org/licenses/mit-license.php.
//
// Deterministic discrete-event network simulator hosting node engines,
// adversary controllers for the attack scenarios, metric collection, and
// report/trace emission. A config fully determines a run: same config,
// same trace bytes, same report.
//
// The event loop is single-threaded. Simulated time is integer
// milliseconds; no wall clock is read anywhere.

#ifndef DCA_SIM_HPP
#define DCA_SIM_HPP

#include <json.hpp>

#include <fstream>
#include <functional>
#include <queue>
#include <random>
#include <sstream>

#include "dca/node.hpp"

namespace dca {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Scenario configuration.

struct LatencyModel {
    enum class Kind : std::uint8_t { Fixed, UniformRange, Matrix };
    Kind kind = Kind::Fixed;
    std::int64_t fixed_ms = 500;
    std::int64_t lo_ms = 200;
    std::int64_t hi_ms = 800;
    std::vector<std::vector<std::int64_t>> matrix_ms; // per-link, indexed by node id
};

inline const char* to_string(LatencyModel::Kind k) {
    switch (k) {
    case LatencyModel::Kind::Fixed: return "fixed";
    case LatencyModel::Kind::UniformRange: return "uniform";
    case LatencyModel::Kind::Matrix: return "matrix";
    }
    return "?";
}

struct AdversaryConfig {
    std::string scenario = "honest_baseline";
    std::vector<std::uint32_t> controlled_voices;
    std::int32_t target_node = -1; // victim node id, scenario-dependent
    bool rigged_schedule = false;
    std::uint64_t attack_slot = 0;
    std::uint32_t run_length = 0; // consecutive rigged slots
    bool victim_extra_link = false;
    std::uint32_t merchant_wait_depth = 10; // 0 = ship on first confirmation
    std::uint64_t partition_start_slot = 0;
    std::uint64_t partition_end_slot = 0;
    std::vector<std::uint32_t> partition_side; // node ids on the minority side
    std::vector<std::uint32_t> withhold_voices;
    std::uint64_t withhold_cycle = 1;
    std::uint32_t exit_voice = UINT32_MAX; // honest voice that exits (rewrite)
    std::uint64_t exit_slot = 0;
    bool only_controlled_produce = false; // forged-history construction
};

struct ScenarioConfig {
    std::uint64_t seed = 1;
    CycleParams params = CycleParams::desk_scale();
    std::uint32_t voices = 20;
    Amount deposit = 1'000;
    std::uint32_t observers = 5;
    Amount genesis_balance = 100'000; // per client account
    LatencyModel latency;
    AdversaryConfig adversary;
    std::uint64_t duration_slots = 60;
    ArbitrationPolicy policy = ArbitrationPolicy::AutoMajorityOfVoices;
    std::int32_t scripted_branch = 0;
    std::uint32_t tx_count = 0;
    std::uint32_t lock_cycles = 36;

    void validate() const {
        params.validate();
        if (voices == 0) throw std::invalid_argument("config: voices must be positive");
        if (observers == 0) throw std::invalid_argument("config: at least one observer required");
        if (duration_slots == 0) throw std::invalid_argument("config: duration_slots must be positive");
        if (deposit == 0) throw std::invalid_argument("config: deposit must be positive");
        if (latency.kind == LatencyModel::Kind::UniformRange && latency.lo_ms > latency.hi_ms)
            throw std::invalid_argument("config: latency range inverted");
        for (auto v : adversary.controlled_voices)
            if (v >= voices) throw std::invalid_argument("config: controlled voice out of range");
        if (latency.kind == LatencyModel::Kind::Matrix &&
            latency.matrix_ms.size() < voices + observers)
            throw std::invalid_argument("config: latency matrix too small");
    }
};

inline const char* to_string(ArbitrationPolicy p) {
    switch (p) {
    case ArbitrationPolicy::AutoMajorityOfVoices: return "auto_majority_of_voices";
    case ArbitrationPolicy::AlwaysAsk: return "always_ask";
    case ArbitrationPolicy::ScriptedAnswer: return "scripted_answer";
    }
    return "?";
}

inline ArbitrationPolicy arbitration_policy_from_string(const std::string& s) {
    if (s == "auto_majority_of_voices") return ArbitrationPolicy::AutoMajorityOfVoices;
    if (s == "always_ask") return ArbitrationPolicy::AlwaysAsk;
    if (s == "scripted_answer") return ArbitrationPolicy::ScriptedAnswer;
    throw std::invalid_argument("unknown arbitration policy: " + s);
}

inline void to_json(Json& j, const LatencyModel& m) {
    j = Json{{"kind", to_string(m.kind)},
             {"fixed_ms", m.fixed_ms},
             {"lo_ms", m.lo_ms},
             {"hi_ms", m.hi_ms},
             {"matrix_ms", m.matrix_ms}};
}

inline void from_json(const Json& j, LatencyModel& m) {
    std::string kind = j.value("kind", "fixed");
    if (kind == "fixed") m.kind = LatencyModel::Kind::Fixed;
    else if (kind == "uniform") m.kind = LatencyModel::Kind::UniformRange;
    else if (kind == "matrix") m.kind = LatencyModel::Kind::Matrix;
    else throw std::invalid_argument("unknown latency kind: " + kind);
    m.fixed_ms = j.value("fixed_ms", std::int64_t{500});
    m.lo_ms = j.value("lo_ms", std::int64_t{200});
    m.hi_ms = j.value("hi_ms", std::int64_t{800});
    m.matrix_ms = j.value("matrix_ms", std::vector<std::vector<std::int64_t>>{});
}

inline void to_json(Json& j, const AdversaryConfig& a) {
    j = Json{{"scenario", a.scenario},
             {"controlled_voices", a.controlled_voices},
             {"target_node", a.target_node},
             {"rigged_schedule", a.rigged_schedule},
             {"attack_slot", a.attack_slot},
             {"run_length", a.run_length},
             {"victim_extra_link", a.victim_extra_link},
             {"merchant_wait_depth", a.merchant_wait_depth},
             {"partition_start_slot", a.partition_start_slot},
             {"partition_end_slot", a.partition_end_slot},
             {"partition_side", a.partition_side},
             {"withhold_voices", a.withhold_voices},
             {"withhold_cycle", a.withhold_cycle},
             {"exit_voice", a.exit_voice},
             {"exit_slot", a.exit_slot},
             {"only_controlled_produce", a.only_controlled_produce}};
}

inline void from_json(const Json& j, AdversaryConfig& a) {
    a.scenario = j.value("scenario", std::string("honest_baseline"));
    a.controlled_voices = j.value("controlled_voices", std::vector<std::uint32_t>{});
    a.target_node = j.value("target_node", -1);
    a.rigged_schedule = j.value("rigged_schedule", false);
    a.attack_slot = j.value("attack_slot", std::uint64_t{0});
    a.run_length = j.value("run_length", std::uint32_t{0});
    a.victim_extra_link = j.value("victim_extra_link", false);
    a.merchant_wait_depth = j.value("merchant_wait_depth", std::uint32_t{10});
    a.partition_start_slot = j.value("partition_start_slot", std::uint64_t{0});
    a.partition_end_slot = j.value("partition_end_slot", std::uint64_t{0});
    a.partition_side = j.value("partition_side", std::vector<std::uint32_t>{});
    a.withhold_voices = j.value("withhold_voices", std::vector<std::uint32_t>{});
    a.withhold_cycle = j.value("withhold_cycle", std::uint64_t{1});
    a.exit_voice = j.value("exit_voice", std::uint32_t{UINT32_MAX});
    a.exit_slot = j.value("exit_slot", std::uint64_t{0});
    a.only_controlled_produce = j.value("only_controlled_produce", false);
}

inline void to_json(Json& j, const CycleParams& p) {
    j = Json{{"cycle_length_s", p.cycle_length_s},
             {"slot_duration_s", p.slot_duration_s},
             {"slices", p.slices},
             {"confirm_depth", p.confirm_depth},
             {"cycle_lag_slots", p.cycle_lag_slots},
             {"prep_period_slots", p.prep_period_slots}};
}

inline void from_json(const Json& j, CycleParams& p) {
    CycleParams d = CycleParams::desk_scale();
    p.cycle_length_s = j.value("cycle_length_s", d.cycle_length_s);
    p.slot_duration_s = j.value("slot_duration_s", d.slot_duration_s);
    p.slices = j.value("slices", d.slices);
    p.confirm_depth = j.value("confirm_depth", d.confirm_depth);
    p.cycle_lag_slots = j.value("cycle_lag_slots", d.cycle_lag_slots);
    p.prep_period_slots = j.value("prep_period_slots", d.prep_period_slots);
}

inline void to_json(Json& j, const ScenarioConfig& c) {
    j = Json{{"seed", c.seed},
             {"params", c.params},
             {"voices", c.voices},
             {"deposit", c.deposit},
             {"observers", c.observers},
             {"genesis_balance", c.genesis_balance},
             {"latency", c.latency},
             {"adversary", c.adversary},
             {"duration_slots", c.duration_slots},
             {"arbitration_policy", to_string(c.policy)},
             {"scripted_branch", c.scripted_branch},
             {"tx_count", c.tx_count},
             {"lock_cycles", c.lock_cycles}};
}

inline void from_json(const Json& j, ScenarioConfig& c) {
    c.seed = j.value("seed", std::uint64_t{1});
    if (j.contains("params")) c.params = j.at("params").get<CycleParams>();
    c.voices = j.value("voices", std::uint32_t{20});
    c.deposit = j.value("deposit", Amount{1'000});
    c.observers = j.value("observers", std::uint32_t{5});
    c.genesis_balance = j.value("genesis_balance", Amount{100'000});
    if (j.contains("latency")) c.latency = j.at("latency").get<LatencyModel>();
    if (j.contains("adversary")) c.adversary = j.at("adversary").get<AdversaryConfig>();
    c.duration_slots = j.value("duration_slots", std::uint64_t{60});
    c.policy = arbitration_policy_from_string(
        j.value("arbitration_policy", std::string("auto_majority_of_voices")));
    c.scripted_branch = j.value("scripted_branch", 0);
    c.tx_count = j.value("tx_count", std::uint32_t{0});
    c.lock_cycles = j.value("lock_cycles", std::uint32_t{36});
}

// ---------------------------------------------------------------------------
// Report.

enum class Verdict : std::uint8_t { Clean, Defended, DoubleSpendSucceeded, UnresolvableFork };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::Clean: return "clean";
    case Verdict::Defended: return "defended";
    case Verdict::DoubleSpendSucceeded: return "double_spend_succeeded";
    case Verdict::UnresolvableFork: return "unresolvable_fork";
    }
    return "?";
}

inline int exit_code_for(Verdict v) {
    switch (v) {
    case Verdict::Clean:
    case Verdict::Defended: return 0;
    case Verdict::DoubleSpendSucceeded: return 3;
    case Verdict::UnresolvableFork: return 4;
    }
    return 1;
}

struct TxMetric {
    Digest tx;
    std::int64_t submit_ms = 0;
    std::int64_t confirm_ms = -1;
    std::int64_t secure_ms = -1;
    std::int64_t confirm_latency_s = -1; // whole simulated seconds
    std::int64_t secure_latency_s = -1;
};

struct SlashEntry {
    std::string voice_hex;
    std::string kind;
    std::vector<std::string> evidence_records;
    std::uint64_t cycle = 0;
    std::int64_t at_ms = 0;
    int node = -1;
};

struct RunReport {
    std::string scenario;
    std::uint64_t seed = 0;
    Verdict verdict = Verdict::Clean;
    std::vector<TxMetric> txs;
    std::uint64_t records_produced = 0;
    std::uint64_t records_safe = 0;
    std::uint64_t slots_missing = 0;
    std::vector<SlashEntry> slashes;
    std::vector<Json> jailings;
    std::map<int, std::string> fork_outcomes; // node -> outcome
    std::vector<Json> partition_warnings;     // {node, at_ms, on}
    std::vector<Json> displaced_secured;      // {node, tx, at_ms}
    std::vector<std::string> violations;
    bool conservation_ok = true;
    Json extra = Json::object();

    Json to_json() const {
        Json jt = Json::array();
        for (const auto& m : txs)
            jt.push_back(Json{{"tx", m.tx.hex()},
                              {"submit_ms", m.submit_ms},
                              {"confirm_ms", m.confirm_ms},
                              {"secure_ms", m.secure_ms},
                              {"confirm_latency_s", m.confirm_latency_s},
                              {"secure_latency_s", m.secure_latency_s}});
        Json js = Json::array();
        for (const auto& s : slashes)
            js.push_back(Json{{"voice", s.voice_hex},
                              {"kind", s.kind},
                              {"evidence_records", s.evidence_records},
                              {"cycle", s.cycle},
                              {"at_ms", s.at_ms},
                              {"node", s.node}});
        Json jf = Json::object();
        for (const auto& [node, outcome] : fork_outcomes) jf[std::to_string(node)] = outcome;
        return Json{{"scenario", scenario},
                    {"seed", seed},
                    {"verdict", to_string(verdict)},
                    {"exit_code", exit_code_for(verdict)},
                    {"tx_metrics", jt},
                    {"records_produced", records_produced},
                    {"records_safe", records_safe},
                    {"slots_missing", slots_missing},
                    {"slashes", js},
                    {"jailings", jailings},
                    {"fork_outcomes", jf},
                    {"partition_warnings", partition_warnings},
                    {"displaced_secured", displaced_secured},
                    {"violations", violations},
                    {"conservation_ok", conservation_ok},
                    {"extra", extra}};
    }
};

// ---------------------------------------------------------------------------

class Simulation {
public:
    explicit Simulation(ScenarioConfig cfg, std::ostream* trace = nullptr)
        : cfg_(std::move(cfg)), trace_(trace), rng_(cfg_.seed) {
        cfg_.validate();
        setup();
    }

    RunReport run() {
        trace_config();
        init_scenario();
        schedule(0, Ev::Kind::SlotTick, -1, -1, 0);
        for (const auto& sub : submissions_)
            schedule(sub.at_ms, Ev::Kind::DeliverTx, sub.node, -1, 0, nullptr,
                     std::make_shared<Transaction>(sub.tx));

        while (!queue_.empty()) {
            Ev ev = queue_.top();
            queue_.pop();
            dispatch(ev);
        }
        return finish();
    }

    const std::vector<Node>& nodes() const { return nodes_; }
    Node& node(std::size_t i) { return nodes_[i]; }
    const ScenarioConfig& config() const { return cfg_; }

    /// Snapshot files for inspection: cb_<index>.bin plus a JSON sidecar.
    void dump_cbs(const std::string& dir) const {
        const Node& n = nodes_[static_cast<std::size_t>(measuring_)];
        for (const auto& cb : n.cb_chain()) {
            std::string base = dir + "/cb_" + std::to_string(cb.cb_index);
            Bytes raw = cb.serialize();
            std::ofstream bin(base + ".bin", std::ios::binary);
            bin.write(reinterpret_cast<const char*>(raw.data()),
                      static_cast<std::streamsize>(raw.size()));
            Json side{{"cb_index", cb.cb_index},
                      {"state_root", cb.state_root.hex()},
                      {"cycle_seed", cb.cycle_seed.hex()},
                      {"created_at_slot", cb.created_at_slot},
                      {"prior_cb_hash", cb.prior_cb_hash.hex()},
                      {"hash", cb.hash().hex()}};
            std::ofstream js(base + ".json");
            js << side.dump(2) << "\n";
        }
    }

    void dump_records(const std::string& dir) const {
        const Node& n = nodes_[measuring_];
        for (const auto& [slot, hashes] : n.applied_slots()) {
            for (const auto& h : hashes) {
                const Record* r = n.dag().get(h);
                Bytes raw = serialize_record(*r);
                std::string path =
                    dir + "/record_" + std::to_string(slot) + "_" + h.short_hex() + ".bin";
                std::ofstream bin(path, std::ios::binary);
                bin.write(reinterpret_cast<const char*>(raw.data()),
                          static_cast<std::streamsize>(raw.size()));
            }
        }
    }

private:
    struct Ev {
        enum class Kind : std::uint8_t {
            SlotTick,
            ProduceTick,
            DeliverRecord,
            DeliverTx,
            PartitionChange,
            AdversaryAction,
        };
        std::int64_t t = 0;
        std::uint64_t seq = 0;
        Kind kind = Kind::SlotTick;
        int node = -1;
        int source = -1;
        std::int64_t aux = 0;
        std::shared_ptr<Record> rec;
        std::shared_ptr<Transaction> tx;

        bool operator>(const Ev& o) const { return std::tie(t, seq) > std::tie(o.t, o.seq); }
    };

    struct Submission {
        Transaction tx;
        std::int64_t at_ms;
        int node; // submitting node
    };

    // ---- setup -------------------------------------------------------------

    Digest derive(const char* label, std::uint64_t i) const {
        Writer w;
        w.u64(cfg_.seed);
        w.u64(i);
        return Hasher().update(label).update(view_of(w.out())).final();
    }

    void setup() {
        eng_.cycle = cfg_.params;
        eng_.ledger.voice_deposit = cfg_.deposit;
        eng_.ledger.lock_cycles = cfg_.lock_cycles;

        const std::uint32_t V = cfg_.voices, O = cfg_.observers;
        for (std::uint32_t i = 0; i < V; ++i)
            voice_keys_.push_back(keypair_from_seed(derive("dca.sim.voice", i)));
        // one wallet per observer, plus a buyer and an accomplice for the
        // adversary scenarios
        for (std::uint32_t i = 0; i < O + 2; ++i)
            client_keys_.push_back(keypair_from_seed(derive("dca.sim.client", i)));

        std::vector<PublicKey> voices;
        for (const auto& kp : voice_keys_) voices.push_back(kp.pk);
        std::vector<std::pair<PublicKey, Amount>> balances;
        for (const auto& kp : client_keys_) balances.emplace_back(kp.pk, cfg_.genesis_balance);
        genesis_ = make_genesis(voices, balances, cfg_.deposit, derive("dca.sim.genesis", 0),
                                cfg_.params);

        for (std::uint32_t i = 0; i < V; ++i)
            nodes_.emplace_back(static_cast<int>(i), eng_, genesis_,
                                VoiceIdentity{voice_keys_[i], derive("dca.sim.rngbase", i)});
        for (std::uint32_t i = 0; i < O; ++i)
            nodes_.emplace_back(static_cast<int>(V + i), eng_, genesis_, std::nullopt);
        measuring_ = static_cast<int>(V);

        // topology: complete graph among voices, observers attached to three
        links_.assign(nodes_.size(), {});
        for (std::uint32_t a = 0; a < V; ++a)
            for (std::uint32_t b = a + 1; b < V; ++b) link(a, b);
        for (std::uint32_t o = 0; o < O; ++o) {
            std::set<std::uint32_t> picks;
            while (picks.size() < std::min<std::uint32_t>(3, V))
                picks.insert(static_cast<std::uint32_t>(rng_() % V));
            for (auto p : picks) link(V + o, p);
        }
        side_.assign(nodes_.size(), 0);

        build_workload();
    }

    void link(std::size_t a, std::size_t b) {
        if (std::find(links_[a].begin(), links_[a].end(), static_cast<int>(b)) != links_[a].end())
            return;
        links_[a].push_back(static_cast<int>(b));
        links_[b].push_back(static_cast<int>(a));
    }

    void build_workload() {
        if (cfg_.tx_count == 0) return;
        // submissions stop early enough for the last transaction to secure
        const std::int64_t slot_ms = cfg_.params.slot_ms();
        const std::int64_t lo = 2 * slot_ms;
        const std::int64_t hi =
            static_cast<std::int64_t>(cfg_.duration_slots > 16 ? cfg_.duration_slots - 16 : 1) *
            slot_ms;
        std::vector<std::int64_t> times;
        for (std::uint32_t i = 0; i < cfg_.tx_count; ++i)
            times.push_back(lo + static_cast<std::int64_t>(rng_() % static_cast<std::uint64_t>(hi - lo)));
        std::sort(times.begin(), times.end());

        std::map<std::size_t, std::uint64_t> seq;
        for (std::uint32_t i = 0; i < cfg_.tx_count; ++i) {
            std::size_t sender = i % cfg_.observers;
            std::size_t recipient = (sender + 1) % cfg_.observers;
            Transaction tx;
            tx.kind = TxKind::Transfer;
            tx.sender = client_keys_[sender].pk;
            tx.recipient = client_keys_[recipient].pk;
            tx.amount = 1 + rng_() % 100;
            tx.timestamp_s = times[i] / 1000;
            tx.sequence = ++seq[sender];
            submissions_.push_back(Submission{make_signed_tx(tx, client_keys_[sender].sk), times[i],
                                              static_cast<int>(cfg_.voices + sender)});
        }
    }

    // ---- event machinery ------------------------------------------------------

    void schedule(std::int64_t t, Ev::Kind kind, int node, int source, std::int64_t aux,
                  std::shared_ptr<Record> rec = nullptr, std::shared_ptr<Transaction> tx = nullptr) {
        Ev ev;
        ev.t = t;
        ev.seq = next_seq_++;
        ev.kind = kind;
        ev.node = node;
        ev.source = source;
        ev.aux = aux;
        ev.rec = std::move(rec);
        ev.tx = std::move(tx);
        queue_.push(std::move(ev));
    }

    std::int64_t latency(int from, int to) {
        switch (cfg_.latency.kind) {
        case LatencyModel::Kind::Fixed: return cfg_.latency.fixed_ms;
        case LatencyModel::Kind::UniformRange:
            return cfg_.latency.lo_ms +
                   static_cast<std::int64_t>(
                       rng_() % static_cast<std::uint64_t>(cfg_.latency.hi_ms - cfg_.latency.lo_ms + 1));
        case LatencyModel::Kind::Matrix:
            return cfg_.latency.matrix_ms[static_cast<std::size_t>(from)][static_cast<std::size_t>(to)];
        }
        return cfg_.latency.fixed_ms;
    }

    bool blocked(int from, int to, std::int64_t t) const {
        if (partition_active_ && side_[static_cast<std::size_t>(from)] !=
                                     side_[static_cast<std::size_t>(to)])
            return true;
        if (isolation_active_ && t >= isolation_start_ms_ && t < isolation_end_ms_) {
            auto is_controlled = [&](int n) {
                for (auto v : cfg_.adversary.controlled_voices)
                    if (static_cast<int>(v) == n) return true;
                return false;
            };
            if (to == isolation_target_ && !is_controlled(from)) return true;
            if (isolation_bidirectional_ && from == isolation_target_ && !is_controlled(to)) return true;
        }
        return false;
    }

    void broadcast_record(int from, const Record& r, std::int64_t t,
                          const std::set<int>& exclude = {}) {
        auto rec = std::make_shared<Record>(r);
        for (int peer : links_[static_cast<std::size_t>(from)]) {
            if (exclude.count(peer) || blocked(from, peer, t)) continue;
            schedule(t + latency(from, peer), Ev::Kind::DeliverRecord, peer, from, 0, rec);
        }
    }

    void broadcast_tx(int from, const Transaction& tx, std::int64_t t) {
        auto ptx = std::make_shared<Transaction>(tx);
        for (int peer : links_[static_cast<std::size_t>(from)]) {
            if (blocked(from, peer, t)) continue;
            schedule(t + latency(from, peer), Ev::Kind::DeliverTx, peer, from, 0, nullptr, ptx);
        }
    }

    void deliver_direct(int to, const Record& r, std::int64_t t, int from) {
        schedule(t + latency(from, to), Ev::Kind::DeliverRecord, to, from, 0,
                 std::make_shared<Record>(r));
    }

    void dispatch(const Ev& ev) {
        switch (ev.kind) {
        case Ev::Kind::SlotTick: on_slot_tick(static_cast<std::uint64_t>(ev.aux), ev.t); break;
        case Ev::Kind::ProduceTick: on_produce_tick(ev.node, static_cast<std::uint64_t>(ev.aux), ev.t); break;
        case Ev::Kind::DeliverRecord: on_deliver_record(ev); break;
        case Ev::Kind::DeliverTx: on_deliver_tx(ev); break;
        case Ev::Kind::PartitionChange: on_partition_change(ev.aux != 0, ev.t); break;
        case Ev::Kind::AdversaryAction: on_adversary_action(ev.aux, ev.t); break;
        }
    }

    void on_slot_tick(std::uint64_t slot, std::int64_t t) {
        for (auto& n : nodes_) {
            bool warned_before = n.partition_warning();
            auto slashes = n.on_slot_begin(slot, t);
            if (n.partition_warning() != warned_before)
                trace(Json{{"ev", "partition_warning"},
                           {"t", t},
                           {"node", n.id()},
                           {"on", n.partition_warning()}});
            for (const auto& s : slashes) trace_slash(n.id(), s);
            if (!slashes.empty() || (slot > 0 && is_cb_boundary_slot(slot, cfg_.params.slices,
                                                                     cfg_.params.cycle_lag_slots)))
                trace(Json{{"ev", "cycle_close"},
                           {"t", t},
                           {"node", n.id()},
                           {"slot", slot},
                           {"cb", n.cb_chain().back().hash().short_hex()}});
        }
        // fork resolution wakes up when enough foreign records accumulated
        for (auto& n : nodes_) {
            if (n.foreign_count() < cfg_.params.confirm_depth) continue;
            if (n.last_fork_outcome().has_value()) continue;
            auto outcome = n.try_resolve_fork(cfg_.policy, cfg_.scripted_branch, t);
            if (outcome)
                trace(Json{{"ev", "fork_resolution"},
                           {"t", t},
                           {"node", n.id()},
                           {"outcome", to_string(*outcome)}});
        }

        // production happens mid-slot; every voice consults its own view of
        // the schedule, which may diverge across forks
        for (std::uint32_t v = 0; v < cfg_.voices; ++v) {
            auto creators = nodes_[v].scheduled_creators(slot);
            if (std::find(creators.begin(), creators.end(), voice_keys_[v].pk) == creators.end())
                continue;
            schedule(t + cfg_.params.slot_ms() / 2, Ev::Kind::ProduceTick, static_cast<int>(v), -1,
                     static_cast<std::int64_t>(slot));
        }
        scenario_on_slot(slot, t);
        if (slot + 1 < cfg_.duration_slots)
            schedule(t + cfg_.params.slot_ms(), Ev::Kind::SlotTick, -1, -1,
                     static_cast<std::int64_t>(slot + 1));
    }

    void on_produce_tick(int v, std::uint64_t slot, std::int64_t t) {
        if (scenario_on_produce(v, slot, t)) return; // controller took over
        auto pr = nodes_[static_cast<std::size_t>(v)].decide_record_action(slot, t);
        if (pr.action == ProduceResult::Action::Abstain) return;
        trace(Json{{"ev", "produce"},
                   {"t", t},
                   {"node", v},
                   {"slot", slot},
                   {"action", to_string(pr.action)},
                   {"record", pr.record->hash().short_hex()},
                   {"reason", pr.reason}});
        drain_status(static_cast<std::size_t>(v), t);
        broadcast_record(v, *pr.record, t);
    }

    void on_deliver_record(const Ev& ev) {
        Node& n = nodes_[static_cast<std::size_t>(ev.node)];
        auto res = n.on_receive_record(*ev.rec, ev.t);
        if (res.action == ReceiveRecordResult::Action::Duplicate) return;
        Json line{{"ev", "record"},
                  {"t", ev.t},
                  {"node", ev.node},
                  {"slot", ev.rec->slot},
                  {"record", ev.rec->hash().short_hex()},
                  {"action", to_string(res.action)}};
        if (res.error) line["error"] = to_string(*res.error);
        if (res.fork) line["fork"] = to_string(res.fork->kind);
        if (res.reorged) line["reorg"] = true;
        trace(line);
        for (const auto& s : res.slashes) trace_slash(ev.node, SlashEvent{s, ev.t});
        drain_status(static_cast<std::size_t>(ev.node), ev.t);
        if (res.relay) {
            auto rec = ev.rec;
            for (int peer : links_[static_cast<std::size_t>(ev.node)]) {
                if (peer == ev.source || blocked(ev.node, peer, ev.t)) continue;
                schedule(ev.t + latency(ev.node, peer), Ev::Kind::DeliverRecord, peer, ev.node, 0, rec);
            }
        }
        // woven records are consensus history now; pass them on
        for (const auto& h : res.woven) {
            const Record* r = n.dag().get(h);
            if (!r) continue;
            auto rec = std::make_shared<Record>(*r);
            for (int peer : links_[static_cast<std::size_t>(ev.node)]) {
                if (blocked(ev.node, peer, ev.t)) continue;
                schedule(ev.t + latency(ev.node, peer), Ev::Kind::DeliverRecord, peer, ev.node, 0, rec);
            }
        }
    }

    void on_deliver_tx(const Ev& ev) {
        Node& n = nodes_[static_cast<std::size_t>(ev.node)];
        auto res = n.on_receive_transaction(*ev.tx, ev.t);
        if (res.action == ReceiveTxResult::Action::Duplicate) return;
        if (ev.source < 0)
            trace(Json{{"ev", "submit"},
                       {"t", ev.t},
                       {"node", ev.node},
                       {"tx", ev.tx->hash().short_hex()}});
        drain_status(static_cast<std::size_t>(ev.node), ev.t);
        if (res.action == ReceiveTxResult::Action::AcceptRelay) {
            auto tx = ev.tx;
            for (int peer : links_[static_cast<std::size_t>(ev.node)]) {
                if (peer == ev.source || blocked(ev.node, peer, ev.t)) continue;
                schedule(ev.t + latency(ev.node, peer), Ev::Kind::DeliverTx, peer, ev.node, 0, nullptr,
                         tx);
            }
        }
    }

    void on_partition_change(bool on, std::int64_t t) {
        partition_active_ = on;
        trace(Json{{"ev", "partition_change"}, {"t", t}, {"on", on}});
        if (!on) exchange_all_records(t);
    }

    /// Post-heal catch-up: every node is offered every record it missed.
    void exchange_all_records(std::int64_t t) {
        std::map<Digest, Record> all;
        for (const auto& n : nodes_)
            for (const auto& [h, r] : n.dag().records) all.emplace(h, r);
        std::vector<const Record*> ordered;
        for (const auto& [h, r] : all) ordered.push_back(&r);
        std::sort(ordered.begin(), ordered.end(), [](const Record* a, const Record* b) {
            if (a->slot != b->slot) return a->slot < b->slot;
            return a->hash() < b->hash();
        });
        for (auto& n : nodes_)
            for (const Record* r : ordered)
                if (!n.dag().contains(r->hash()))
                    schedule(t + latency(0, n.id()), Ev::Kind::DeliverRecord, n.id(), -1, 0,
                             std::make_shared<Record>(*r));
    }

    // ---- scenario controllers ---------------------------------------------------

    void init_scenario();
    bool scenario_on_produce(int v, std::uint64_t slot, std::int64_t t);
    void scenario_on_slot(std::uint64_t slot, std::int64_t t);
    void on_adversary_action(std::int64_t code, std::int64_t t);
    Bytes voice_cycle_secret(std::uint32_t voice, std::uint64_t cycle);

    bool is_controlled(int v) const {
        for (auto c : cfg_.adversary.controlled_voices)
            if (static_cast<int>(c) == v) return true;
        return false;
    }

    Record craft_record(std::uint32_t voice, std::uint64_t slot, const Digest& prior_cb,
                        std::vector<Digest> acks, std::vector<Transaction> txs, std::int64_t t,
                        Bytes reveal = {}) {
        RecordInputs in;
        in.slot = slot;
        in.keys = &voice_keys_[voice];
        in.prior_cb_hash = prior_cb;
        Digest d = derive("dca.sim.advsecret", voice);
        in.rng_commitment = commit(ByteView(d.bytes.data(), d.bytes.size()));
        in.rng_reveal = std::move(reveal);
        in.created_at_ms = t;
        return build_record(in, std::move(acks), std::move(txs), false);
    }

    Transaction make_transfer(std::size_t from_client, std::size_t to_client, Amount amount,
                              std::uint64_t seq, std::int64_t ts_s) {
        Transaction tx;
        tx.kind = TxKind::Transfer;
        tx.sender = client_keys_[from_client].pk;
        tx.recipient = client_keys_[to_client].pk;
        tx.amount = amount;
        tx.timestamp_s = ts_s;
        tx.sequence = seq;
        return make_signed_tx(tx, client_keys_[from_client].sk);
    }

    // ---- metrics and report ------------------------------------------------------

    void drain_status(std::size_t node_idx, std::int64_t t) {
        if (static_cast<int>(node_idx) != measuring_ && static_cast<int>(node_idx) != victim_node_)
            return;
        Node& n = nodes_[node_idx];
        auto& cursor = status_cursor_[node_idx];
        const auto& events = n.status_events();
        for (; cursor < events.size(); ++cursor) {
            const auto& e = events[cursor];
            if (static_cast<int>(node_idx) == measuring_)
                trace(Json{{"ev", "tx_status"},
                           {"t", e.at_ms},
                           {"node", n.id()},
                           {"tx", e.tx_hash.short_hex()},
                           {"status", to_string(e.status)},
                           {"slot", e.slot}});
        }
        (void)t;
    }

    void trace_config() {
        Json j;
        to_json(j, cfg_);
        trace(Json{{"ev", "config"}, {"config", j}});
    }

    void trace_slash(int node, const SlashEvent& s) {
        Json recs = Json::array();
        for (const auto& h : s.evidence.record_hashes) recs.push_back(h.short_hex());
        trace(Json{{"ev", "slash"},
                   {"t", s.at_ms},
                   {"node", node},
                   {"voice", s.evidence.voice.short_hex()},
                   {"kind", to_string(s.evidence.kind)},
                   {"evidence_records", recs},
                   {"cycle", s.evidence.cycle}});
    }

    void trace(const Json& j) {
        if (!trace_) return;
        *trace_ << j.dump() << "\n";
    }

    RunReport finish();

    // ---- members ---------------------------------------------------------------

    ScenarioConfig cfg_;
    EngineParams eng_;
    std::ostream* trace_ = nullptr;
    std::mt19937_64 rng_;

    std::vector<KeyPair> voice_keys_;
    std::vector<KeyPair> client_keys_;
    GenesisInfo genesis_;
    std::vector<Node> nodes_;
    std::vector<std::vector<int>> links_;
    int measuring_ = 0;
    int victim_node_ = -1;

    std::priority_queue<Ev, std::vector<Ev>, std::greater<Ev>> queue_;
    std::uint64_t next_seq_ = 0;

    std::vector<Submission> submissions_;
    std::map<std::size_t, std::size_t> status_cursor_;

    // partitions and isolation windows
    bool partition_active_ = false;
    std::vector<int> side_;
    bool isolation_active_ = false;
    bool isolation_bidirectional_ = false;
    int isolation_target_ = -1;
    std::int64_t isolation_start_ms_ = 0;
    std::int64_t isolation_end_ms_ = 0;

    // adversary bookkeeping
    std::uint64_t attack_slot_ = 0;
    Transaction pay_tx_, steal_tx_;
    bool have_attack_txs_ = false;
    Digest adv_branch_head_;
    Digest pub_branch_head_;
    bool adv_branch_started_ = false;
    std::vector<Record> secret_records_;
    std::set<Digest> secret_hashes_;
    std::unique_ptr<Node> shadow_; // colluders' private view
    bool shipped_ = false;
    std::int64_t shipped_at_ = -1;
    bool released_ = false;
    std::uint64_t foreign_needed_ = 0;
};

} // namespace dca

#endif // DCA_SIM_HPP
