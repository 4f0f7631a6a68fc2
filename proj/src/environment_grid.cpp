#include <algorithm>
#include <cstdio>

#include "gforge/environment.hpp"

namespace gforge {

namespace {

const char* kObjectTypes[] = {"apple", "mug", "book", "cloth", "plate", "egg"};
const char* kFillerNames[] = {"shelf", "drawer", "cabinet", "countertop", "bin"};

struct Instance {
    int location;  // receptacle index, -1 while held
    bool clean = false;
    bool hot = false;
    bool cold = false;
    bool examined = false;
};

}  // namespace

const char* grid_task_type_name(GridTaskType t) {
    switch (t) {
        case GridTaskType::Pick: return "pick";
        case GridTaskType::Clean: return "clean";
        case GridTaskType::Heat: return "heat";
        case GridTaskType::Cool: return "cool";
        case GridTaskType::Examine: return "examine";
        case GridTaskType::PickTwo: return "pick-two";
    }
    return "unknown";
}

GridPlanEnv::GridPlanEnv(GridPlanConfig config) : config_(config) {
    if (config_.max_actions < 1) throw ConfigError("grid-plan max_actions must be >= 1");
    if (config_.receptacles < 6) throw ConfigError("grid-plan needs at least 6 receptacles");
    vocab_ = Vocabulary({"find", "clean", "heat", "cool", "lamp", "place", "scan"});
}

// World layout is keyed entirely by (world_seed, task.id) so that step() can
// reconstruct it without hidden state; the prompt is derived from the layout,
// never the other way round.
GridPlanEnv::World GridPlanEnv::derive_world(const Task& task) const {
    RandomSource rng(config_.world_seed, fnv1a(task.id));
    const int R = config_.receptacles;
    World w;
    w.type = static_cast<GridTaskType>(rng.next_below(6));
    w.object = kObjectTypes[rng.next_below(std::size(kObjectTypes))];

    // four appliance receptacles at seeded distinct slots
    std::vector<size_t> special = rng.sample_indices(static_cast<size_t>(R), 4);
    w.sink = static_cast<int>(special[0]);
    w.microwave = static_cast<int>(special[1]);
    w.fridge = static_cast<int>(special[2]);
    w.desk = static_cast<int>(special[3]);

    w.recep_names.resize(static_cast<size_t>(R));
    int filler = 0;
    for (int r = 0; r < R; ++r) {
        if (r == w.sink) w.recep_names[static_cast<size_t>(r)] = "sink";
        else if (r == w.microwave) w.recep_names[static_cast<size_t>(r)] = "microwave";
        else if (r == w.fridge) w.recep_names[static_cast<size_t>(r)] = "fridge";
        else if (r == w.desk) w.recep_names[static_cast<size_t>(r)] = "desk";
        else {
            const char* base = kFillerNames[filler % std::size(kFillerNames)];
            w.recep_names[static_cast<size_t>(r)] =
                std::string(base) + "-" + std::to_string(filler / std::size(kFillerNames) + 1);
            ++filler;
        }
    }

    // goal receptacle: any non-appliance slot
    std::vector<int> fillers;
    for (int r = 0; r < R; ++r)
        if (r != w.sink && r != w.microwave && r != w.fridge && r != w.desk) fillers.push_back(r);
    w.target_recep = fillers[rng.next_below(fillers.size())];

    const int instances = w.type == GridTaskType::PickTwo ? 2 : 1;
    for (int i = 0; i < instances; ++i) {
        int slot;
        do {
            slot = static_cast<int>(rng.next_below(static_cast<uint64_t>(R)));
        } while (slot == w.target_recep);  // never spawn already solved
        w.object_slots.push_back(slot);
    }
    return w;
}

std::vector<std::string> GridPlanEnv::required_subgoals(GridTaskType t) const {
    switch (t) {
        case GridTaskType::Pick: return {"find", "place"};
        case GridTaskType::Clean: return {"find", "clean", "place"};
        case GridTaskType::Heat: return {"find", "heat", "place"};
        case GridTaskType::Cool: return {"find", "cool", "place"};
        case GridTaskType::Examine: return {"find", "lamp"};
        case GridTaskType::PickTwo: return {"find", "place", "find", "place"};
    }
    throw EnvError("unknown grid task type");
}

std::string GridPlanEnv::context_key(const Task& task) const {
    return std::string("grid:") + grid_task_type_name(derive_world(task).type);
}

int GridPlanEnv::feedback_bucket(const std::string& feedback) const {
    if (feedback == "action limit reached") return 1;
    int idx = -1;
    if (std::sscanf(feedback.c_str(), "subgoal %d unreachable", &idx) == 1 && idx >= 0)
        return 2 + std::min(idx, 5);
    return 0;
}

GeneratorResponse GridPlanEnv::step(const Task& task, const Guidance& guidance) const {
    if (task.kind != TaskKind::Planning)
        throw EnvError("grid-plan environment expects planning tasks");
    const World w = derive_world(task);
    const int R = config_.receptacles;

    std::vector<Instance> instances;
    for (int slot : w.object_slots) instances.push_back(Instance{slot});

    int actions = 0;
    int agent_at = 0;
    int holding = -1;
    bool goal = false;
    bool over_budget = false;

    auto goal_met = [&] {
        int at_target = 0;
        for (const auto& inst : instances) {
            const bool placed = inst.location == w.target_recep;
            switch (w.type) {
                case GridTaskType::Pick:
                    if (placed) return true;
                    break;
                case GridTaskType::Clean:
                    if (placed && inst.clean) return true;
                    break;
                case GridTaskType::Heat:
                    if (placed && inst.hot) return true;
                    break;
                case GridTaskType::Cool:
                    if (placed && inst.cold) return true;
                    break;
                case GridTaskType::Examine:
                    if (inst.examined) return true;
                    break;
                case GridTaskType::PickTwo:
                    if (placed) ++at_target;
                    break;
            }
        }
        return w.type == GridTaskType::PickTwo && at_target >= 2;
    };

    // every primitive action runs through here; the budget is a hard stop
    auto act = [&](int goto_recep) {
        if (goal || over_budget) return false;
        if (actions >= config_.max_actions) {
            over_budget = true;
            return false;
        }
        ++actions;
        if (goto_recep >= 0) agent_at = goto_recep;
        if (goal_met()) goal = true;
        return true;
    };

    std::optional<std::string> subgoal_failure;
    for (size_t i = 0; i < guidance.tokens.size() && !goal && !over_budget; ++i) {
        const std::string& word = vocab_.word(guidance.tokens[i]);
        auto unreachable = [&](const std::string& reason) {
            subgoal_failure = "subgoal " + std::to_string(i) + " unreachable: " + reason;
        };
        if (word == "find") {
            if (holding >= 0) {
                unreachable("hands full");
                break;
            }
            int found = -1;
            for (int r = 0; r < R && found < 0 && !over_budget; ++r) {
                if (!act(r)) break;
                for (size_t k = 0; k < instances.size(); ++k) {
                    if (instances[k].location == r && r != w.target_recep) {
                        found = static_cast<int>(k);
                        break;
                    }
                }
                if (found >= 0) {
                    if (!act(-1)) break;  // take
                    holding = found;
                    instances[static_cast<size_t>(found)].location = -1;
                }
            }
            if (found < 0 && !over_budget) {
                unreachable("object not found");
                break;
            }
        } else if (word == "clean" || word == "heat" || word == "cool" || word == "lamp") {
            if (holding < 0) {
                unreachable("not holding object");
                break;
            }
            int where = word == "clean"  ? w.sink
                        : word == "heat" ? w.microwave
                        : word == "cool" ? w.fridge
                                         : w.desk;
            if (!act(where)) break;
            if (!act(-1)) break;  // operate the appliance
            Instance& held = instances[static_cast<size_t>(holding)];
            if (word == "clean") held.clean = true;
            else if (word == "heat") { held.hot = true; held.cold = false; }
            else if (word == "cool") { held.cold = true; held.hot = false; }
            else held.examined = true;
        } else if (word == "place") {
            if (holding < 0) {
                unreachable("nothing to place");
                break;
            }
            if (!act(w.target_recep)) break;
            if (!act(-1)) break;  // put
            instances[static_cast<size_t>(holding)].location = w.target_recep;
            holding = -1;
        } else if (word == "scan") {
            for (int r = 0; r < R; ++r)
                if (!act(r)) break;
        } else {
            throw VocabError("unknown grid subgoal '" + word + "'");
        }
    }

    // an agent with no working plan left keeps patrolling until the budget runs out
    while (!goal && !over_budget && !subgoal_failure) act((agent_at + 1) % R);

    std::string answer = std::to_string(actions) + " actions; goal " + (goal ? "met" : "unmet");
    if (goal) return make_response(answer, 1.0, std::nullopt);
    if (subgoal_failure) return make_response(answer, 0.0, subgoal_failure);
    return make_response(answer, 0.0, "action limit reached");
}

std::vector<Guidance> GridPlanEnv::admissible_guidances(const Task& task) const {
    const World w = derive_world(task);
    std::vector<std::string> words = required_subgoals(w.type);
    std::sort(words.begin(), words.end());
    std::vector<Guidance> out;
    do {
        if (words.front() != "find") continue;  // type-check: search before manipulation
        std::vector<int> tokens;
        for (const auto& word : words) tokens.push_back(*vocab_.id(word));
        out.push_back(make_guidance(tokens, vocab_));
    } while (std::next_permutation(words.begin(), words.end()));
    return out;
}

Guidance GridPlanEnv::expert_guidance(const Task& task) const {
    // highest-utility admissible guidance; ties go to the earliest candidate
    std::vector<Guidance> candidates = admissible_guidances(task);
    size_t best = 0;
    double best_u = -1.0;
    for (size_t i = 0; i < candidates.size(); ++i) {
        double u = step(task, candidates[i]).utility.value;
        if (u > best_u) {
            best_u = u;
            best = i;
        }
    }
    return candidates[best];
}

std::vector<Task> GridPlanEnv::generate_tasks(int n, RandomSource& rng) const {
    if (n < 1) throw EnvError("generate_tasks requires n >= 1");
    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "%08llx",
                  static_cast<unsigned long long>(rng.next_u64() & 0xffffffffull));
    std::vector<Task> tasks;
    for (int i = 0; i < n; ++i) {
        Task task;
        task.id = "grid-" + std::string(prefix) + "-" + std::to_string(i);
        task.kind = TaskKind::Planning;
        const World w = derive_world(task);
        const std::string& target = w.recep_names[static_cast<size_t>(w.target_recep)];
        switch (w.type) {
            case GridTaskType::Pick:
                task.prompt = "put a " + w.object + " in " + target;
                break;
            case GridTaskType::Clean:
                task.prompt = "put a clean " + w.object + " in " + target;
                break;
            case GridTaskType::Heat:
                task.prompt = "put a hot " + w.object + " in " + target;
                break;
            case GridTaskType::Cool:
                task.prompt = "put a cold " + w.object + " in " + target;
                break;
            case GridTaskType::Examine:
                task.prompt = "examine the " + w.object + " under the desk lamp";
                break;
            case GridTaskType::PickTwo:
                task.prompt = "put two " + w.object + "s in " + target;
                break;
        }
        validate_task(task);
        tasks.push_back(std::move(task));
    }
    return tasks;
}

}  // namespace gforge
