// Writes the demo inputs: make_demos <output-dir>

#include "open5x/config.hpp"
#include "open5x/demo.hpp"
#include "open5x/mesh.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

bool write(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out << bytes;
    if (!out) {
        std::cerr << "cannot write " << path << '\n';
        return false;
    }
    return true;
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_demos <output-dir>\n";
        return 2;
    }
    namespace fs = std::filesystem;
    fs::path dir = argv[1];
    fs::create_directories(dir);
    using namespace open5x;
    std::string cfg = "# open5x machine description, default values\n" + to_text(MachineConfig{});
    bool ok = write(dir / "flat_plate.stl", write_binary_stl(demo::flat_plate())) &&
              write(dir / "hemisphere.stl", write_binary_stl(demo::hemisphere())) &&
              write(dir / "machine.cfg", cfg) && write(dir / "sample.cls", demo::sample_cls()) &&
              write(dir / "hemisphere.region", demo::region_text(demo::hemisphere_region()) + "\n");
    return ok ? 0 : 1;
}
