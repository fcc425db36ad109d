// Line-protocol model server for gateway tests.
//
//   fake_model_server <mode> [--exit-after N] [--require-env VAR]
//
// modes: victim, motion, text, llm (heuristic), echo (llm returning the
// instruction), ppl, error (every reply is an error object), garbage
// (non-JSON replies), bad-vector (wrong dimension), silent (exits at once).

#include <cstdlib>
#include <iostream>
#include <string>

#include "prompt_siege/eval/perplexity.hpp"
#include "prompt_siege/gateway/remote.hpp"
#include "prompt_siege/testbed/heuristic_llm.hpp"

using namespace prompt_siege;

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: fake_model_server <mode> [--exit-after N] [--require-env VAR]\n";
        return 64;
    }
    const std::string mode = argv[1];
    long exit_after = -1;
    for (int i = 2; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--exit-after") exit_after = std::stol(argv[i + 1]);
        if (flag == "--require-env" && std::getenv(argv[i + 1]) == nullptr) return 3;
    }
    if (mode == "silent") return 0;

    testbed::HeuristicLlm llm(0);
    std::optional<TrigramScorer> ppl;
    if (mode == "ppl") ppl.emplace();

    std::string line;
    long served = 0;
    while (std::getline(std::cin, line)) {
        json reply;
        try {
            const json req = json::parse(line);
            const std::string op = req.at("op").get<std::string>();
            if (mode == "error") {
                reply = {{"error", "model overloaded"}};
            } else if (mode == "garbage") {
                std::cout << "<html>not json</html>" << std::endl;
                continue;
            } else if (op == "generate" && mode == "victim") {
                const auto clip = testbed::synth_generate(req.at("prompt").get<std::string>(), req.at("seed").get<std::uint64_t>());
                reply = detail::clip_to_wire(clip);
            } else if (op == "encode" && mode == "motion") {
                reply = {{"vector", testbed::motion_features(detail::clip_from_wire(req.at("payload"), "victim"))}};
            } else if (op == "encode" && mode == "text") {
                reply = {{"vector", testbed::text_features(req.at("payload").get<std::string>())}};
            } else if (op == "encode" && mode == "bad-vector") {
                reply = {{"vector", {1.0, 2.0}}};
            } else if (op == "complete" && mode == "llm") {
                const auto instruction = req.at("instruction").get<std::string>();
                reply = {{"text", llm.respond(testbed::HeuristicLlm::detect_kind(instruction), instruction)}};
            } else if (op == "complete" && mode == "echo") {
                reply = {{"text", req.at("instruction").get<std::string>()}};
            } else if (op == "token_nll" && mode == "ppl") {
                reply = {{"nll", ppl->token_nll(req.at("text").get<std::string>())}};
            } else {
                reply = {{"error", "unsupported op " + op + " in mode " + mode}};
            }
        } catch (const std::exception& e) {
            reply = {{"error", e.what()}};
        }
        std::cout << reply.dump() << std::endl;
        if (exit_after > 0 && ++served >= exit_after) return 0;
    }
    return 0;
}
