#include "gforge/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace gforge {

using nlohmann::json;

namespace {

json header_record(const std::string& file_kind, const ArtifactInfo& info) {
    return json{{"type", "header"},
                {"format", "guidance-forge/" + file_kind},
                {"version", kFormatVersion},
                {"producer", info.producer},
                {"config_hash", info.config_hash}};
}

void check_header(const json& j, const std::string& file_kind) {
    if (!j.is_object() || j.value("type", "") != "header")
        throw FormatError("missing artifact header");
    if (j.value("format", "") != "guidance-forge/" + file_kind)
        throw FormatError("unexpected artifact format '" + j.value("format", "") + "'");
    if (j.value("version", -1) != kFormatVersion)
        throw FormatError("unsupported artifact version");
}

json parse_line(const std::string& line) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        throw FormatError(std::string("corrupt artifact line: ") + e.what());
    }
}

std::vector<json> read_jsonl(const std::filesystem::path& path, const std::string& file_kind) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path.string() + "'");
    std::string line;
    std::vector<json> records;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = parse_line(line);
        if (!saw_header) {
            check_header(j, file_kind);
            saw_header = true;
            continue;
        }
        records.push_back(std::move(j));
    }
    if (!saw_header) throw FormatError("empty artifact '" + path.string() + "'");
    return records;
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + path.string() + "'");
    return out;
}

}  // namespace

// ----------------------------- codecs -----------------------------

json task_to_json(const Task& task) {
    json j{{"type", "task"},
           {"id", task.id},
           {"prompt", task.prompt},
           {"kind", task_kind_name(task.kind)}};
    if (task.ground_truth) j["ground_truth"] = *task.ground_truth;
    if (!task.profile.empty()) {
        json profile = json::array();
        for (const auto& [item, label] : task.profile) profile.push_back(json::array({item, label}));
        j["profile"] = profile;
    }
    return j;
}

Task task_from_json(const json& j) {
    try {
        Task task;
        task.id = j.at("id").get<std::string>();
        task.prompt = j.at("prompt").get<std::string>();
        task.kind = task_kind_from_name(j.at("kind").get<std::string>());
        if (j.contains("ground_truth")) task.ground_truth = j["ground_truth"].get<std::string>();
        if (j.contains("profile"))
            for (const auto& entry : j["profile"])
                task.profile.emplace_back(entry.at(0).get<std::string>(),
                                          entry.at(1).get<std::string>());
        validate_task(task);
        return task;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad task record: ") + e.what());
    }
}

json guidance_to_json(const Guidance& g) {
    return json{{"tokens", g.tokens},
                {"text", g.text},
                {"iteration", g.iteration},
                {"turn", g.turn},
                {"sample_index", g.sample_index}};
}

Guidance guidance_from_json(const json& j) {
    try {
        Guidance g;
        g.tokens = j.at("tokens").get<std::vector<int>>();
        g.text = j.at("text").get<std::string>();
        g.iteration = j.value("iteration", 0);
        g.turn = j.value("turn", 1);
        g.sample_index = j.value("sample_index", 1);
        if (g.tokens.empty()) throw FormatError("guidance record has no tokens");
        return g;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad guidance record: ") + e.what());
    }
}

json observation_to_json(const Observation& o) {
    json j{{"signal", o.signal}, {"answer", o.answer}};
    if (o.feedback) j["feedback"] = *o.feedback;
    return j;
}

Observation observation_from_json(const json& j) {
    try {
        std::optional<std::string> feedback;
        if (j.contains("feedback")) feedback = j["feedback"].get<std::string>();
        return make_observation(j.at("signal").get<int>(), j.at("answer").get<std::string>(),
                                std::move(feedback));
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad observation record: ") + e.what());
    }
}

json trajectory_to_json(const Trajectory& t) {
    json steps = json::array();
    for (const auto& step : t.steps)
        steps.push_back(json{{"action", guidance_to_json(step.action)},
                             {"observation", observation_to_json(step.observation)}});
    return json{{"type", "trajectory"},
                {"task_id", t.task_id},
                {"context", t.context},
                {"prompt", t.prompt},
                {"terminated_positive", t.terminated_positive},
                {"steps", steps}};
}

Trajectory trajectory_from_json(const json& j) {
    try {
        Trajectory t;
        t.task_id = j.at("task_id").get<std::string>();
        t.context = j.value("context", "");
        t.prompt = j.value("prompt", "");
        t.terminated_positive = j.at("terminated_positive").get<bool>();
        for (const auto& step : j.at("steps"))
            t.steps.push_back({guidance_from_json(step.at("action")),
                               observation_from_json(step.at("observation"))});
        validate_trajectory(t, 0);
        return t;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad trajectory record: ") + e.what());
    }
}

json pair_to_json(const PreferencePair& p) {
    return json{{"type", "pair"},
                {"task_id", p.task_id},
                {"context", p.context},
                {"prompt", p.prompt},
                {"positive", guidance_to_json(p.positive)},
                {"negative", guidance_to_json(p.negative)}};
}

PreferencePair pair_from_json(const json& j) {
    try {
        PreferencePair p;
        p.task_id = j.at("task_id").get<std::string>();
        p.context = j.value("context", "");
        p.prompt = j.value("prompt", "");
        p.positive = guidance_from_json(j.at("positive"));
        p.negative = guidance_from_json(j.at("negative"));
        if (p.positive.tokens == p.negative.tokens)
            throw FormatError("pair record with identical guidances");
        return p;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad pair record: ") + e.what());
    }
}

json report_to_json(const MetricReport& r) {
    json per_kind = json::object();
    for (const auto& [kind, metrics] : r.per_kind) {
        per_kind[kind] = json{{"metrics", metrics}, {"count", r.kind_counts.at(kind)}};
    }
    return json{{"overall", r.overall}, {"sample_count", r.sample_count}, {"per_kind", per_kind}};
}

// ----------------------------- artifact files -----------------------------

void save_tasks(const std::filesystem::path& path, const std::vector<Task>& tasks,
                const ArtifactInfo& info) {
    auto out = open_out(path);
    out << header_record("tasks", info).dump() << '\n';
    for (const auto& task : tasks) out << task_to_json(task).dump() << '\n';
}

std::vector<Task> load_tasks(const std::filesystem::path& path) {
    std::vector<Task> tasks;
    std::map<std::string, bool> seen;
    for (const auto& j : read_jsonl(path, "tasks")) {
        Task task = task_from_json(j);
        if (seen.count(task.id)) throw FormatError("duplicate task id '" + task.id + "'");
        seen[task.id] = true;
        tasks.push_back(std::move(task));
    }
    return tasks;
}

void save_trajectories(const std::filesystem::path& path, const std::vector<Trajectory>& trajs,
                       const ArtifactInfo& info) {
    auto out = open_out(path);
    out << header_record("trajectories", info).dump() << '\n';
    for (const auto& t : trajs) out << trajectory_to_json(t).dump() << '\n';
}

std::vector<Trajectory> load_trajectories(const std::filesystem::path& path) {
    std::vector<Trajectory> out;
    for (const auto& j : read_jsonl(path, "trajectories")) out.push_back(trajectory_from_json(j));
    return out;
}

void save_pairs(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs,
                const ArtifactInfo& info) {
    auto out = open_out(path);
    out << header_record("pairs", info).dump() << '\n';
    for (const auto& p : pairs) out << pair_to_json(p).dump() << '\n';
}

std::vector<PreferencePair> load_pairs(const std::filesystem::path& path) {
    std::vector<PreferencePair> out;
    for (const auto& j : read_jsonl(path, "pairs")) out.push_back(pair_from_json(j));
    return out;
}

void save_dataset(const std::filesystem::path& path, const GuidanceDataset& dataset,
                  const ArtifactInfo& info) {
    auto out = open_out(path);
    out << header_record("dataset", info).dump() << '\n';
    out << json{{"type", "dataset-meta"}, {"iteration", dataset.iteration}}.dump() << '\n';
    for (const auto& [task_id, entry] : dataset.tasks) {
        auto write = [&](const char* label, const std::map<std::vector<int>, Guidance>& pool) {
            for (const auto& [tokens, g] : pool) {
                out << json{{"type", "dataset-entry"},
                            {"task_id", task_id},
                            {"context", entry.context},
                            {"prompt", entry.prompt},
                            {"label", label},
                            {"guidance", guidance_to_json(g)}}
                           .dump()
                    << '\n';
            }
        };
        write("positive", entry.positives);
        write("negative", entry.negatives);
    }
}

GuidanceDataset load_dataset(const std::filesystem::path& path) {
    GuidanceDataset dataset;
    bool saw_meta = false;
    for (const auto& j : read_jsonl(path, "dataset")) {
        const std::string type = j.value("type", "");
        if (type == "dataset-meta") {
            dataset.iteration = j.at("iteration").get<int>();
            saw_meta = true;
            continue;
        }
        if (type != "dataset-entry") throw FormatError("unexpected record '" + type + "'");
        try {
            auto& entry = dataset.tasks[j.at("task_id").get<std::string>()];
            entry.context = j.value("context", "");
            entry.prompt = j.value("prompt", "");
            Guidance g = guidance_from_json(j.at("guidance"));
            const std::string label = j.at("label").get<std::string>();
            if (label == "positive") entry.positives.emplace(g.tokens, std::move(g));
            else if (label == "negative") entry.negatives.emplace(g.tokens, std::move(g));
            else throw FormatError("unknown dataset label '" + label + "'");
        } catch (const json::exception& e) {
            throw FormatError(std::string("bad dataset record: ") + e.what());
        }
    }
    if (!saw_meta) throw FormatError("dataset artifact is missing its meta record");
    return dataset;
}

// ----------------------------- checkpoints -----------------------------

namespace {

json policy_to_json(const PolicyTable& p) {
    json contexts = json::array();
    for (const auto& ctx : p.contexts())
        contexts.push_back(
            json{{"key", ctx.key}, {"guidances", ctx.guidances}, {"logits", ctx.logits}});
    return json{{"kind", "table"}, {"vocab", p.vocab().words()}, {"contexts", contexts}};
}

json policy_to_json(const TokenPolicy& p) {
    return json{{"kind", "token"},
                {"vocab", p.guidance_vocab().words()},
                {"context_buckets", p.context_buckets()},
                {"max_len", p.max_len()},
                {"start_logits", p.start_logits()},
                {"bigram_logits", p.bigram_logits()},
                {"context_logits", p.context_logits()}};
}

PolicyVariant policy_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "table") {
        Vocabulary vocab(j.at("vocab").get<std::vector<std::string>>());
        std::vector<PolicyTable::Context> contexts;
        for (const auto& c : j.at("contexts"))
            contexts.push_back(PolicyTable::Context{
                c.at("key").get<std::string>(),
                c.at("guidances").get<std::vector<std::vector<int>>>(),
                c.at("logits").get<std::vector<double>>()});
        return PolicyTable(vocab, std::move(contexts));
    }
    if (kind == "token") {
        Vocabulary vocab(j.at("vocab").get<std::vector<std::string>>());
        TokenPolicy p(vocab, j.at("context_buckets").get<int>(), j.at("max_len").get<int>());
        auto start = j.at("start_logits").get<std::vector<double>>();
        auto bigram = j.at("bigram_logits").get<std::vector<std::vector<double>>>();
        auto context = j.at("context_logits").get<std::vector<std::vector<double>>>();
        if (static_cast<int>(start.size()) != p.vocab_size() ||
            static_cast<int>(bigram.size()) != p.vocab_size() ||
            static_cast<int>(context.size()) != p.context_buckets())
            throw FormatError("checkpoint parameter shapes do not match the policy header");
        p.start_logits() = std::move(start);
        p.bigram_logits() = std::move(bigram);
        p.context_logits() = std::move(context);
        return p;
    }
    throw FormatError("unknown policy kind '" + kind + "'");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const PolicyVariant& policy,
                     int iteration, const ArtifactInfo& info) {
    json j{{"format", "guidance-forge/checkpoint"},
           {"version", kFormatVersion},
           {"producer", info.producer},
           {"config_hash", info.config_hash},
           {"iteration", iteration}};
    std::visit([&](const auto& p) { j["policy"] = policy_to_json(p); }, policy);
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

PolicyVariant load_checkpoint(const std::filesystem::path& path, int* iteration) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open checkpoint '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(std::string("corrupt checkpoint: ") + e.what());
    }
    if (j.value("format", "") != "guidance-forge/checkpoint")
        throw FormatError("not a checkpoint file");
    if (j.value("version", -1) != kFormatVersion)
        throw FormatError("unsupported checkpoint version");
    if (iteration) *iteration = j.value("iteration", 0);
    try {
        return policy_from_json(j.at("policy"));
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad checkpoint policy: ") + e.what());
    }
}

void save_report(const std::filesystem::path& path, const json& payload,
                 const ArtifactInfo& info) {
    json j{{"format", "guidance-forge/report"},
           {"version", kFormatVersion},
           {"producer", info.producer},
           {"config_hash", info.config_hash},
           {"report", payload}};
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

json load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open report '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(std::string("corrupt report: ") + e.what());
    }
    if (j.value("format", "") != "guidance-forge/report") throw FormatError("not a report file");
    if (j.value("version", -1) != kFormatVersion) throw FormatError("unsupported report version");
    return j.at("report");
}

// ----------------------------- config -----------------------------

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> values;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + " is not 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || key.find('.') == std::string::npos)
            throw ConfigError("config key '" + key + "' must look like section.key");
        values[key] = value;
    }
    return values;
}

std::map<std::string, std::string> load_config_file(const std::filesystem::path& path,
                                                    bool apply_env_overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    auto values = parse_config_text(buffer.str());
    if (apply_env_overrides) {
        for (auto& [key, value] : values) {
            std::string env_name = "GUIDANCE_FORGE_";
            for (char c : key) {
                if (c == '.') env_name += '_';
                else env_name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            }
            if (const char* override_value = std::getenv(env_name.c_str()))
                value = override_value;
        }
    }
    return values;
}

std::string config_hash(const std::map<std::string, std::string>& values) {
    uint64_t h = fnv1a("config");
    for (const auto& [key, value] : values) {
        h = fnv1a(key, h);
        h = fnv1a("=", h);
        h = fnv1a(value, h);
        h = fnv1a("\n", h);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace gforge
