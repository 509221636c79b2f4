"""Regenerates the MovieLens-shaped fixture (ml100/ratings.tsv, ml100/items.tsv)."""
import random
from pathlib import Path

rng = random.Random(20240611)
GENRES = ["Action", "Adventure", "Animation", "Comedy", "Crime", "Documentary", "Drama",
          "Fantasy", "Horror", "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War"]
WORDS = ["Night", "River", "Shadow", "Summer", "Iron", "Glass", "Last", "Silent", "Red",
         "Frozen", "Hidden", "Falling", "Golden", "Broken", "Wild", "Electric"]
NOUNS = ["City", "Garden", "Empire", "Station", "Harbor", "Voyage", "Protocol", "Island",
         "Letter", "Machine", "Kingdom", "Orchard", "Signal", "Border", "Carnival"]

out = Path(__file__).parent / "ml100"
out.mkdir(exist_ok=True)

items = []
for i in range(1, 31):
    title = f"{rng.choice(WORDS)} {rng.choice(NOUNS)} ({rng.randint(1970, 2005)})"
    genres = rng.sample(GENRES, rng.randint(1, 3))
    desc = f"A {genres[0].lower()} story about {title.split(' (')[0].lower()}."
    thumb = f"thumbs/i{i:02d}.jpg" if i % 5 else ""
    reviews = str(rng.randint(0, 120))
    pos = f"Loved the {genres[-1].lower()} moments."
    neg = f"The {genres[0].lower()} plot dragged on."
    items.append((f"i{i:02d}", title, "|".join(genres), desc, thumb, reviews, pos, neg))

with open(out / "items.tsv", "w") as f:
    f.write("item_id\ttitle\tgenres\tdescription\tthumbnail\treview_count\tpositive_review\tnegative_review\n")
    for row in items:
        f.write("\t".join(row) + "\n")

rows = set()
ts = 978300000
lines = []
while len(lines) < 100:
    u = f"u{rng.randint(1, 10):02d}"
    it = f"i{rng.choice([rng.randint(1, 30), rng.randint(1, 8)]):02d}"
    if (u, it) in rows:
        continue
    rows.add((u, it))
    ts += rng.randint(1, 5000)
    lines.append((u, it, str(rng.choices([1, 2, 3, 4, 5], [1, 2, 4, 6, 4])[0]), str(ts)))
rng.shuffle(lines)
with open(out / "ratings.tsv", "w") as f:
    f.write("user_id\titem_id\trating\ttimestamp\n")
    for row in lines:
        f.write("\t".join(row) + "\n")
