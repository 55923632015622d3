// Minimal trainer speaking the line protocol, for tests.
// Usage: stub_trainer [ok|preds|wrong-id|silent|error|mismatch|crash-once]
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <json.hpp>

#include "seqnas/distill.hpp"

using nlohmann::ordered_json;

namespace {

void send(const ordered_json& m)
{
    std::cout << m.dump() << '\n' << std::flush;
}

}  // namespace

int main(int argc, char** argv)
{
    const std::string mode = argc > 1 ? argv[1] : "ok";
    for (std::string line; std::getline(std::cin, line);) {
        const auto msg = ordered_json::parse(line);
        const std::string type = msg.at("type");
        if (type == "hello") {
            std::string hash = msg.at("space_hash");
            if (mode == "mismatch")
                hash = "0000";
            send({{"type", "hello_ok"}, {"proto", 1}, {"space_hash", hash}});
            continue;
        }
        if (type != "train")
            continue;
        const std::string id = msg.at("arch_id");
        if (mode == "silent") {
            std::this_thread::sleep_for(std::chrono::seconds(30));
            continue;
        }
        if (mode == "crash-once") {
            // Dies on the first request; the marker file makes the next spawn succeed.
            const std::filesystem::path marker = "stub_crashed";
            if (!std::filesystem::exists(marker)) {
                std::ofstream(marker) << "1";
                return 3;
            }
        }
        if (mode == "error") {
            send({{"type", "error"}, {"arch_id", id}, {"code", "oom"}, {"message", "out of memory"}});
            continue;
        }
        ordered_json reply{{"type", "result"},
                           {"arch_id", mode == "wrong-id" ? std::string(64, '0') : id},
                           {"score", 0.5},
                           {"metric", "stub"},
                           {"per_epoch", {0.3, 0.5}}};
        if (mode == "preds") {
            seqnas::PredictionCache cache(std::filesystem::current_path());
            seqnas::LogitMatrix m(2, 2);
            m.values = {0.1f, 0.2f, 0.3f, 0.4f};
            cache.write(seqnas::ArchId(id), m, "stub");
            reply["preds_file"] = seqnas::PredictionCache::data_file_name(seqnas::ArchId(id));
            reply["teachers_seen"] = msg.contains("kd") ? msg["kd"]["teacher_files"].size() : 0;
        }
        send(reply);
    }
    return 0;
}
